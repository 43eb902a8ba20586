mod common;

use std::collections::BTreeMap;

use common::{brute_product, product_set};
use dualmatch::mesh::{shapes, FeatureMatrix, Mesh};
use dualmatch::product::{
    build_matching, decode_matching, enumerate_product_triangles, identity_selection, verify_solution,
};

fn check_against_brute(m: &Mesh, n: &Mesh) -> usize {
    let ps = enumerate_product_triangles(m, n);
    let ours = product_set(&ps);
    assert_eq!(ours.len(), ps.len(), "duplicate product triangles");
    assert_eq!(ours, brute_product(m, n));
    ps.len()
}

#[test]
fn enumeration_matches_brute_force() {
    let tetra = shapes::tetrahedron();
    let octa = shapes::octahedron();
    let icosa = shapes::icosahedron();
    assert_eq!(check_against_brute(&tetra, &tetra), 368);
    assert_eq!(check_against_brute(&icosa, &icosa), 8880);
    check_against_brute(&tetra, &octa);
    check_against_brute(&octa, &icosa);
}

#[test]
fn ratio_on_spheres() {
    for (slices, stacks) in [(6, 4), (8, 5), (10, 6)] {
        let s = shapes::uv_sphere(slices, stacks);
        let ps = enumerate_product_triangles(&s, &s);
        assert!((20.0..=24.0).contains(&ps.ratio()), "{slices}x{stacks}: {}", ps.ratio());
    }
    let ico = shapes::icosphere(1);
    let ps = enumerate_product_triangles(&ico, &shapes::icosahedron());
    assert!((20.0..=24.0).contains(&ps.ratio()));
}

#[test]
fn boundary_rows_are_signed_incidences() {
    let octa = shapes::octahedron();
    let (ps, program) = build_matching(
        &octa,
        &octa,
        &FeatureMatrix::from_positions(&octa),
        &FeatureMatrix::from_positions(&octa),
    )
    .unwrap();
    let rows = common::rows_of(&program.instance);
    // independent signed incidence from the oriented boundary
    let mut want: BTreeMap<((usize, usize), (usize, usize)), BTreeMap<usize, i64>> = BTreeMap::new();
    for (p, t) in ps.triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (t.pairs[k], t.pairs[(k + 1) % 3]);
            let (key, s) = if a <= b { ((a, b), 1) } else { ((b, a), -1) };
            *want.entry(key).or_default().entry(p).or_default() += s;
        }
    }
    assert_eq!(program.layout.boundary.len(), want.len());
    for (i, (edge, terms)) in want.iter().enumerate() {
        assert_eq!(&program.layout.edges[i], edge);
        let got: BTreeMap<usize, i64> = rows[i].terms.iter().copied().collect();
        let terms: BTreeMap<usize, i64> = terms.iter().filter(|(_, &c)| c != 0).map(|(&p, &c)| (p, c)).collect();
        assert_eq!(got, terms);
        assert_eq!(rows[i].rhs, 0);
    }
    for i in program.layout.projection_m.clone().chain(program.layout.projection_n.clone()) {
        assert_eq!(rows[i].rhs, 1);
        assert!(rows[i].terms.iter().all(|t| t.1 == 1));
    }
}

#[test]
fn identity_matching_has_zero_cost() {
    for mesh in [shapes::tetrahedron(), shapes::octahedron(), shapes::icosahedron(), shapes::torus(6, 4)] {
        let f = FeatureMatrix::from_positions(&mesh);
        let (ps, program) = build_matching(&mesh, &mesh, &f, &f).unwrap();
        let x = identity_selection(&ps);
        let report = verify_solution(&x, &common::rows_of(&program.instance), Some(&program.layout)).unwrap();
        assert!(report.is_ok(), "{report:?}");
        assert_eq!(program.instance.objective(&x), 0.0);
        let matching = decode_matching(&x, &ps, &program, &f, &f).unwrap();
        let ident: Vec<Option<usize>> = (0..mesh.vertices.len()).map(Some).collect();
        assert_eq!(matching.point_map, ident);
    }
}

#[test]
fn verify_counts_violations_by_block() {
    let tetra = shapes::tetrahedron();
    let f = FeatureMatrix::from_positions(&tetra);
    let (ps, program) = build_matching(&tetra, &tetra, &f, &f).unwrap();
    let rows = common::rows_of(&program.instance);
    let mut x = identity_selection(&ps);
    let first = x.iter().position(|&b| b).unwrap();
    x[first] = false;
    let report = verify_solution(&x, &rows, Some(&program.layout)).unwrap();
    assert_eq!(report.projection_m_violations, 1);
    assert_eq!(report.projection_n_violations, 1);
    assert_eq!(report.boundary_violations, 3);
    assert!(verify_solution(&x[..10], &rows, None).is_err());
}
