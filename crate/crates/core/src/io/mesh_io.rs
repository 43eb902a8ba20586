use std::fmt::Write as _;
use std::path::Path;

use super::{read_text, write_text, IoError};
use crate::mesh::Mesh;

/// Non-empty, non-comment lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn numbers<T: std::str::FromStr>(path: &Path, line: usize, s: &str, what: &str) -> Result<Vec<T>, IoError> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| IoError::parse(path, line, format!("invalid {what} '{t}'")))
        })
        .collect()
}

fn face(path: &Path, line: usize, idx: &[usize], nv: usize) -> Result<[usize; 3], IoError> {
    if idx.len() != 3 {
        return Err(IoError::parse(path, line, format!("face has {} vertices, only triangles are supported", idx.len())));
    }
    if let Some(v) = idx.iter().find(|&&v| v >= nv) {
        return Err(IoError::parse(path, line, format!("vertex index {v} out of range ({nv} vertices)")));
    }
    Ok([idx[0], idx[1], idx[2]])
}

pub fn parse_off(path: &Path, text: &str) -> Result<Mesh, IoError> {
    let mut lines = content_lines(text);
    let last_line = text.lines().count().max(1);
    let (l0, head) = lines.next().ok_or_else(|| IoError::parse(path, 1, "empty file"))?;
    let counts_src = match head.strip_prefix("OFF") {
        Some(rest) if !rest.trim().is_empty() => (l0, rest.trim().to_string()),
        Some(_) => {
            let (l, s) = lines.next().ok_or_else(|| IoError::parse(path, l0, "missing counts line"))?;
            (l, s.to_string())
        }
        None => return Err(IoError::parse(path, l0, "expected 'OFF' header")),
    };
    let counts: Vec<usize> = numbers(path, counts_src.0, &counts_src.1, "count")?;
    if counts.len() < 2 {
        return Err(IoError::parse(path, counts_src.0, "expected vertex and face counts"));
    }
    let (nv, nf) = (counts[0], counts[1]);
    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let (l, s) = lines
            .next()
            .ok_or_else(|| IoError::parse(path, last_line, format!("expected {nv} vertices, found {k}")))?;
        let p: Vec<f64> = numbers(path, l, s, "coordinate")?;
        if p.len() < 3 {
            return Err(IoError::parse(path, l, "vertex needs 3 coordinates"));
        }
        vertices.push([p[0], p[1], p[2]]);
    }
    let mut triangles = Vec::with_capacity(nf);
    for k in 0..nf {
        let (l, s) = lines
            .next()
            .ok_or_else(|| IoError::parse(path, last_line, format!("expected {nf} faces, found {k}")))?;
        let idx: Vec<usize> = numbers(path, l, s, "index")?;
        let (&n, rest) = idx.split_first().ok_or_else(|| IoError::parse(path, l, "empty face"))?;
        if rest.len() < n {
            return Err(IoError::parse(path, l, format!("face declares {n} vertices but lists {}", rest.len())));
        }
        triangles.push(face(path, l, &rest[..n], nv)?);
    }
    if let Some((l, _)) = lines.next() {
        return Err(IoError::parse(path, l, format!("more data than the declared {nf} faces")));
    }
    Ok(Mesh::new(vertices, triangles))
}

pub fn parse_ply(path: &Path, text: &str) -> Result<Mesh, IoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let last_line = text.lines().count().max(1);
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(IoError::parse(path, 1, "expected 'ply' header")),
    }
    let mut nv = None;
    let mut nf = None;
    let mut current = "";
    let mut vertex_props: Vec<String> = Vec::new();
    let mut saw_format = false;
    loop {
        let (l, s) = lines
            .next()
            .ok_or_else(|| IoError::parse(path, last_line, "missing end_header"))?;
        let tok: Vec<&str> = s.split_whitespace().collect();
        match tok.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => saw_format = true,
            ["format", other, ..] => {
                return Err(IoError::parse(path, l, format!("unsupported format '{other}', only ascii")));
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let c: usize = count
                    .parse()
                    .map_err(|_| IoError::parse(path, l, format!("invalid element count '{count}'")))?;
                current = if *name == "vertex" {
                    nv = Some(c);
                    "vertex"
                } else if *name == "face" {
                    nf = Some(c);
                    "face"
                } else {
                    return Err(IoError::parse(path, l, format!("unsupported element '{name}'")));
                };
            }
            ["property", "list", _, _, _] if current == "face" => {}
            ["property", _, name] if current == "vertex" => vertex_props.push(name.to_string()),
            _ => return Err(IoError::parse(path, l, format!("unsupported header line '{s}'"))),
        }
    }
    if !saw_format {
        return Err(IoError::parse(path, 1, "missing format line"));
    }
    let pos = |name: &str| vertex_props.iter().position(|p| p == name);
    let (Some(ix), Some(iy), Some(iz)) = (pos("x"), pos("y"), pos("z")) else {
        return Err(IoError::parse(path, 1, "vertex element lacks x, y, z"));
    };
    let (nv, nf) = (nv.unwrap_or(0), nf.unwrap_or(0));
    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let (l, s) = lines
            .next()
            .ok_or_else(|| IoError::parse(path, last_line, format!("expected {nv} vertices, found {k}")))?;
        let p: Vec<f64> = numbers(path, l, s, "value")?;
        if p.len() != vertex_props.len() {
            return Err(IoError::parse(path, l, format!("expected {} values", vertex_props.len())));
        }
        vertices.push([p[ix], p[iy], p[iz]]);
    }
    let mut triangles = Vec::with_capacity(nf);
    for k in 0..nf {
        let (l, s) = lines
            .next()
            .ok_or_else(|| IoError::parse(path, last_line, format!("expected {nf} faces, found {k}")))?;
        let idx: Vec<usize> = numbers(path, l, s, "index")?;
        let (&n, rest) = idx.split_first().ok_or_else(|| IoError::parse(path, l, "empty face"))?;
        if rest.len() != n {
            return Err(IoError::parse(path, l, format!("face declares {n} vertices but lists {}", rest.len())));
        }
        triangles.push(face(path, l, rest, nv)?);
    }
    if let Some((l, s)) = lines.find(|(_, s)| !s.is_empty()) {
        return Err(IoError::parse(path, l, format!("unexpected trailing data '{s}'")));
    }
    Ok(Mesh::new(vertices, triangles))
}

/// Reads `.off` or `.ply` (ASCII) by extension, falling back to the header.
pub fn read_mesh(path: &Path) -> Result<Mesh, IoError> {
    let text = read_text(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("off") => parse_off(path, &text),
        Some("ply") => parse_ply(path, &text),
        _ if text.trim_start().starts_with("ply") => parse_ply(path, &text),
        _ => parse_off(path, &text),
    }
}

pub fn render_off(mesh: &Mesh) -> String {
    let mut s = format!("OFF\n{} {} 0\n", mesh.num_vertices(), mesh.num_triangles());
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:?} {:?} {:?}", p[0], p[1], p[2]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn render_ply(mesh: &Mesh) -> String {
    let mut s = String::from("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", mesh.num_vertices());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    let _ = writeln!(s, "element face {}", mesh.num_triangles());
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:?} {:?} {:?}", p[0], p[1], p[2]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<(), IoError> {
    let ply = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("ply"));
    write_text(path, &if ply { render_ply(mesh) } else { render_off(mesh) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::*;

    #[test]
    fn minimal_off() {
        let text = "OFF\n# tetra\n4 4 6\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";
        let m = parse_off(Path::new("t.off"), text).unwrap();
        assert_eq!((m.num_vertices(), m.num_triangles()), (4, 4));
        m.validate("t").unwrap();
    }

    #[test]
    fn bad_face_count_names_line() {
        let text = "OFF\n4 5 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";
        let err = parse_off(Path::new("t.off"), text).unwrap_err().to_string();
        assert!(err.contains("t.off:10"), "{err}");
        let text = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n";
        let err = parse_off(Path::new("t.off"), text).unwrap_err().to_string();
        assert!(err.contains(":6:"), "{err}");
    }

    #[test]
    fn ply_round_trip_bit_exact() {
        let mut m = icosphere(1);
        m.vertices[3][0] = 0.1 + 0.2;
        m.vertices[5][2] = -1e-300;
        let back = parse_ply(Path::new("m.ply"), &render_ply(&m)).unwrap();
        assert_eq!(back, m);
        let back = parse_off(Path::new("m.off"), &render_off(&m)).unwrap();
        assert_eq!(back, m);
    }
}
