mod common;

use common::rotate;
use dualmatch::c2f::{allowed_pairs, prune_product_space, run_hierarchy, LevelFeatures, ResolutionLevel};
use dualmatch::mesh::{shapes, FeatureMatrix};
use dualmatch::product::{build_matching, decode_matching, verify_solution};
use dualmatch::solver::solve;
use dualmatch::SolveConfig;

#[test]
fn pruning_around_the_optimum_keeps_it() {
    let octa = shapes::octahedron();
    let other = rotate(&octa, 0.4, -0.2);
    let (fm, fnn) = (FeatureMatrix::from_positions(&octa), FeatureMatrix::from_positions(&other));
    let (ps, program) = build_matching(&octa, &other, &fm, &fnn).unwrap();
    let cfg = SolveConfig::default();
    let full = solve(&program.instance, &cfg).unwrap();
    assert!(full.is_certified());
    let x = full.assignment.unwrap();
    let matching = decode_matching(&x, &ps, &program, &fm, &fnn).unwrap();

    // a level that is its own coarser level
    let level = |mesh| ResolutionLevel {
        mesh,
        projection: (0..6).collect(),
    };
    let (lm, ln) = (level(octa.clone()), level(other.clone()));
    // ring 0 keeps exactly the matched vertex pairs
    let allowed = allowed_pairs(&matching.vertex_pairs, (6, 6), &lm, &ln, 0);
    let pruned = prune_product_space(&ps, &allowed).unwrap();
    assert!(pruned.space.len() < ps.len());
    assert!(pruned.kept.windows(2).all(|w| w[0] < w[1]));
    let out = solve(&pruned.program.instance, &cfg).unwrap();
    assert!(out.is_certified());
    let y = out.assignment.unwrap();
    let obj_full = program.instance.objective(&x);
    let obj_pruned = pruned.program.instance.objective(&y);
    assert!((obj_full - obj_pruned).abs() < 1e-6, "{obj_full} vs {obj_pruned}");

    // lifting the pruned solution gives a feasible full solution
    let mut lifted = vec![false; ps.len()];
    for (i, &p) in pruned.kept.iter().enumerate() {
        lifted[p] = y[i];
    }
    let rows = common::rows_of(&program.instance);
    assert!(verify_solution(&lifted, &rows, Some(&program.layout)).unwrap().is_ok());
}

#[test]
fn two_level_icosphere_hierarchy() {
    let coarse = shapes::icosahedron();
    let (fine, projection) = shapes::subdivide_sphere(&coarse);
    let (az, ax) = (0.25, 0.1);
    let levels_m = vec![
        ResolutionLevel::coarsest(coarse.clone()),
        ResolutionLevel {
            mesh: fine.clone(),
            projection: projection.clone(),
        },
    ];
    let levels_n = vec![
        ResolutionLevel::coarsest(rotate(&coarse, az, ax)),
        ResolutionLevel {
            mesh: rotate(&fine, az, ax),
            projection,
        },
    ];
    let features: Vec<LevelFeatures> = levels_m
        .iter()
        .zip(&levels_n)
        .map(|(a, b)| LevelFeatures {
            m: FeatureMatrix::from_positions(&a.mesh),
            n: FeatureMatrix::from_positions(&b.mesh),
        })
        .collect();
    let out = run_hierarchy(&levels_m, &levels_n, &features, &SolveConfig::default(), &[2, 3]).unwrap();
    assert_eq!(out.levels.len(), 2);
    assert_eq!(out.levels[0].ring, None);
    assert!(out.levels[1].ring.is_some());
    assert_eq!(out.levels[1].num_triangles, (80, 80));
    for l in &out.levels {
        assert!(l.report.as_ref().is_some_and(|r| r.certified), "{l:?}");
    }
    // every fine vertex is matched
    assert!(out.matching.point_map.iter().all(Option::is_some));
    assert_eq!(out.space.len(), out.assignment.len());
}
