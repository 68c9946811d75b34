//! Mesh file I/O: ASCII OFF and OBJ, ASCII and binary little-endian PLY.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::geom::Pt3;
use crate::mesh::TriangleMesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    PlyAscii,
    PlyBinary,
}

impl MeshFormat {
    pub fn from_extension(path: &Path) -> Result<MeshFormat> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("off") => Ok(MeshFormat::Off),
            Some("obj") => Ok(MeshFormat::Obj),
            Some("ply") => Ok(MeshFormat::PlyBinary),
            other => Err(CoreError::UnsupportedFormat(format!(
                "unknown mesh extension {other:?} for {}",
                path.display()
            ))),
        }
    }
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> CoreError {
    CoreError::MalformedFile {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Loads a mesh, inferring the format from the file extension (PLY handles
/// both ASCII and binary transparently). Degenerate triangles are dropped.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    match MeshFormat::from_extension(path)? {
        MeshFormat::Off => load_off(path),
        MeshFormat::Obj => load_obj(path),
        MeshFormat::PlyAscii | MeshFormat::PlyBinary => load_ply(path),
    }
}

/// Writes a mesh in the given format.
pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>, format: MeshFormat) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        MeshFormat::Off => {
            writeln!(w, "OFF")?;
            writeln!(w, "{} {} 0", mesh.vertex_count(), mesh.triangle_count())?;
            for v in mesh.vertices() {
                writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
            }
            for t in mesh.triangles() {
                writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
            }
        }
        MeshFormat::Obj => {
            for v in mesh.vertices() {
                writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
            }
            for t in mesh.triangles() {
                writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
            }
        }
        MeshFormat::PlyAscii | MeshFormat::PlyBinary => {
            let binary = format == MeshFormat::PlyBinary;
            writeln!(w, "ply")?;
            if binary {
                writeln!(w, "format binary_little_endian 1.0")?;
            } else {
                writeln!(w, "format ascii 1.0")?;
            }
            writeln!(w, "element vertex {}", mesh.vertex_count())?;
            writeln!(w, "property float x")?;
            writeln!(w, "property float y")?;
            writeln!(w, "property float z")?;
            writeln!(w, "element face {}", mesh.triangle_count())?;
            writeln!(w, "property list uchar int vertex_indices")?;
            writeln!(w, "end_header")?;
            if binary {
                for v in mesh.vertices() {
                    for c in [v.x as f32, v.y as f32, v.z as f32] {
                        w.write_all(&c.to_le_bytes())?;
                    }
                }
                for t in mesh.triangles() {
                    w.write_all(&[3u8])?;
                    for &ix in t {
                        w.write_all(&(ix as i32).to_le_bytes())?;
                    }
                }
            } else {
                for v in mesh.vertices() {
                    writeln!(w, "{} {} {}", v.x as f32, v.y as f32, v.z as f32)?;
                }
                for t in mesh.triangles() {
                    writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_off(path: &Path) -> Result<TriangleMesh> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.split('#').next().unwrap_or("").trim().to_string();
        if !trimmed.is_empty() {
            lines.push((i + 1, trimmed));
        }
    }
    let mut cursor = 1usize;
    let (first_no, first) = lines
        .first()
        .ok_or_else(|| malformed(path, 1, "empty file"))?;
    let mut header_rest = None;
    if first != "OFF" {
        if let Some(rest) = first.strip_prefix("OFF") {
            // counts on the same line as the magic
            header_rest = Some((*first_no, rest.trim().to_string()));
        } else {
            return Err(malformed(path, *first_no, "missing OFF magic"));
        }
    }
    let (counts_no, counts_line) = match header_rest {
        Some(h) => h,
        None => {
            let item = lines
                .get(cursor)
                .ok_or_else(|| malformed(path, *first_no, "missing count line"))?;
            cursor += 1;
            (item.0, item.1.clone())
        }
    };
    let counts: Vec<usize> = counts_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| malformed(path, counts_no, format!("bad count line: {e}")))?;
    if counts.len() < 2 {
        return Err(malformed(path, counts_no, "expected vertex and face counts"));
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let (no, line) = lines
            .get(cursor + k)
            .ok_or_else(|| malformed(path, counts_no, format!("expected {nv} vertices")))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .take(3)
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| malformed(path, *no, format!("bad vertex: {e}")))?;
        if vals.len() != 3 {
            return Err(malformed(path, *no, "vertex needs 3 coordinates"));
        }
        vertices.push(Pt3::new(vals[0], vals[1], vals[2]));
    }
    cursor += nv;

    let mut triangles = Vec::with_capacity(nf);
    for k in 0..nf {
        let (no, line) = lines
            .get(cursor + k)
            .ok_or_else(|| malformed(path, counts_no, format!("expected {nf} faces")))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let arity: usize = toks[0]
            .parse()
            .map_err(|e| malformed(path, *no, format!("bad face arity: {e}")))?;
        if toks.len() < arity + 1 {
            return Err(malformed(path, *no, "face has fewer indices than declared"));
        }
        let idx: Vec<u32> = toks[1..=arity]
            .iter()
            .map(|t| t.parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| malformed(path, *no, format!("bad face index: {e}")))?;
        push_fan(&mut triangles, &idx);
    }
    TriangleMesh::new(vertices, triangles)
}

pub fn load_obj(path: &Path) -> Result<TriangleMesh> {
    let reader = BufReader::new(File::open(path)?);
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let no = i + 1;
        let trimmed = line.trim();
        if trimmed.starts_with("v ") || trimmed.starts_with("v\t") {
            let vals: Vec<f64> = trimmed[1..]
                .split_whitespace()
                .take(3)
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| malformed(path, no, format!("bad vertex: {e}")))?;
            if vals.len() != 3 {
                return Err(malformed(path, no, "vertex needs 3 coordinates"));
            }
            vertices.push(Pt3::new(vals[0], vals[1], vals[2]));
        } else if trimmed.starts_with("f ") || trimmed.starts_with("f\t") {
            let mut idx = Vec::new();
            for tok in trimmed[1..].split_whitespace() {
                let first = tok.split('/').next().unwrap_or("");
                let raw: i64 = first
                    .parse()
                    .map_err(|e| malformed(path, no, format!("bad face index '{tok}': {e}")))?;
                let resolved = if raw > 0 {
                    raw - 1
                } else if raw < 0 {
                    vertices.len() as i64 + raw
                } else {
                    return Err(malformed(path, no, "face index 0 is invalid"));
                };
                if resolved < 0 || resolved >= vertices.len() as i64 {
                    return Err(malformed(path, no, format!("face index {raw} out of range")));
                }
                idx.push(resolved as u32);
            }
            push_fan(&mut triangles, &idx);
        }
    }
    TriangleMesh::new(vertices, triangles)
}

#[derive(Clone, Copy, PartialEq)]
enum PlyScalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyScalar {
    fn parse(tok: &str) -> Option<PlyScalar> {
        match tok {
            "char" | "int8" => Some(PlyScalar::I8),
            "uchar" | "uint8" => Some(PlyScalar::U8),
            "short" | "int16" => Some(PlyScalar::I16),
            "ushort" | "uint16" => Some(PlyScalar::U16),
            "int" | "int32" => Some(PlyScalar::I32),
            "uint" | "uint32" => Some(PlyScalar::U32),
            "float" | "float32" => Some(PlyScalar::F32),
            "double" | "float64" => Some(PlyScalar::F64),
            _ => None,
        }
    }

    fn size(self) -> usize {
        match self {
            PlyScalar::I8 | PlyScalar::U8 => 1,
            PlyScalar::I16 | PlyScalar::U16 => 2,
            PlyScalar::I32 | PlyScalar::U32 | PlyScalar::F32 => 4,
            PlyScalar::F64 => 8,
        }
    }

    fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            PlyScalar::I8 => bytes[0] as i8 as f64,
            PlyScalar::U8 => bytes[0] as f64,
            PlyScalar::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            PlyScalar::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            PlyScalar::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            PlyScalar::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            PlyScalar::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            PlyScalar::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
        }
    }
}

enum PlyProperty {
    Scalar { name: String, ty: PlyScalar },
    List { name: String, count: PlyScalar, item: PlyScalar },
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

pub fn load_ply(path: &Path) -> Result<TriangleMesh> {
    let mut file = BufReader::new(File::open(path)?);
    let mut header_lines = Vec::new();
    let mut line_no = 0usize;
    loop {
        let mut line = String::new();
        let n = file.read_line(&mut line)?;
        if n == 0 {
            return Err(malformed(path, line_no, "unexpected end of header"));
        }
        line_no += 1;
        let trimmed = line.trim().to_string();
        let done = trimmed == "end_header";
        header_lines.push((line_no, trimmed));
        if done {
            break;
        }
    }

    let (first_no, magic) = &header_lines[0];
    if magic != "ply" {
        return Err(malformed(path, *first_no, "missing ply magic"));
    }
    let mut ascii = None;
    let mut elements: Vec<PlyElement> = Vec::new();
    for (no, line) in &header_lines[1..] {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("format") => {
                ascii = match toks.get(1).copied() {
                    Some("ascii") => Some(true),
                    Some("binary_little_endian") => Some(false),
                    other => {
                        return Err(malformed(
                            path,
                            *no,
                            format!("unsupported ply format {other:?}"),
                        ))
                    }
                };
            }
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let count: usize = toks
                    .get(2)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| malformed(path, *no, "bad element line"))?;
                elements.push(PlyElement {
                    name: toks.get(1).unwrap_or(&"").to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| malformed(path, *no, "property before element"))?;
                if toks.get(1) == Some(&"list") {
                    let count = PlyScalar::parse(toks.get(2).unwrap_or(&""))
                        .ok_or_else(|| malformed(path, *no, "bad list count type"))?;
                    let item = PlyScalar::parse(toks.get(3).unwrap_or(&""))
                        .ok_or_else(|| malformed(path, *no, "bad list item type"))?;
                    element.properties.push(PlyProperty::List {
                        name: toks.get(4).unwrap_or(&"").to_string(),
                        count,
                        item,
                    });
                } else {
                    let ty = PlyScalar::parse(toks.get(1).unwrap_or(&""))
                        .ok_or_else(|| malformed(path, *no, "bad property type"))?;
                    element.properties.push(PlyProperty::Scalar {
                        name: toks.get(2).unwrap_or(&"").to_string(),
                        ty,
                    });
                }
            }
            Some("end_header") => break,
            other => return Err(malformed(path, *no, format!("unexpected token {other:?}"))),
        }
    }
    let ascii = ascii.ok_or_else(|| malformed(path, *first_no, "missing format line"))?;

    let mut body = Vec::new();
    file.read_to_end(&mut body)?;

    let mut vertices: Vec<Pt3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();

    if ascii {
        let text = String::from_utf8_lossy(&body);
        let mut rows = text.lines().filter(|l| !l.trim().is_empty());
        for element in &elements {
            for r in 0..element.count {
                let row = rows.next().ok_or_else(|| {
                    malformed(path, line_no, format!("missing row {r} of element {}", element.name))
                })?;
                let mut toks = row.split_whitespace();
                let mut xyz = [f64::NAN; 3];
                let mut face: Vec<u32> = Vec::new();
                for p in &element.properties {
                    match p {
                        PlyProperty::Scalar { name, .. } => {
                            let v: f64 = toks
                                .next()
                                .ok_or_else(|| malformed(path, line_no, "short row"))?
                                .parse()
                                .map_err(|e| malformed(path, line_no, format!("bad scalar: {e}")))?;
                            match name.as_str() {
                                "x" => xyz[0] = v,
                                "y" => xyz[1] = v,
                                "z" => xyz[2] = v,
                                _ => {}
                            }
                        }
                        PlyProperty::List { name, .. } => {
                            let count: usize = toks
                                .next()
                                .ok_or_else(|| malformed(path, line_no, "short row"))?
                                .parse()
                                .map_err(|e| malformed(path, line_no, format!("bad list count: {e}")))?;
                            let mut idx = Vec::with_capacity(count);
                            for _ in 0..count {
                                let v: i64 = toks
                                    .next()
                                    .ok_or_else(|| malformed(path, line_no, "short face row"))?
                                    .parse()
                                    .map_err(|e| malformed(path, line_no, format!("bad index: {e}")))?;
                                idx.push(v as u32);
                            }
                            if name == "vertex_indices" || name == "vertex_index" {
                                face = idx;
                            }
                        }
                    }
                }
                if element.name == "vertex" {
                    vertices.push(Pt3::new(xyz[0], xyz[1], xyz[2]));
                } else if element.name == "face" {
                    push_fan(&mut triangles, &face);
                }
            }
        }
    } else {
        let mut offset = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            if offset + n > body.len() {
                return Err(malformed(path, line_no, "binary body truncated"));
            }
            let s = &body[offset..offset + n];
            offset += n;
            Ok(s)
        };
        for element in &elements {
            for _ in 0..element.count {
                let mut xyz = [f64::NAN; 3];
                let mut face: Vec<u32> = Vec::new();
                for p in &element.properties {
                    match p {
                        PlyProperty::Scalar { name, ty } => {
                            let v = ty.read_le(take(ty.size())?);
                            match name.as_str() {
                                "x" => xyz[0] = v,
                                "y" => xyz[1] = v,
                                "z" => xyz[2] = v,
                                _ => {}
                            }
                        }
                        PlyProperty::List { name, count, item } => {
                            let n = count.read_le(take(count.size())?) as usize;
                            let mut idx = Vec::with_capacity(n);
                            for _ in 0..n {
                                idx.push(item.read_le(take(item.size())?) as u32);
                            }
                            if name == "vertex_indices" || name == "vertex_index" {
                                face = idx;
                            }
                        }
                    }
                }
                if element.name == "vertex" {
                    vertices.push(Pt3::new(xyz[0], xyz[1], xyz[2]));
                } else if element.name == "face" {
                    push_fan(&mut triangles, &face);
                }
            }
        }
    }

    TriangleMesh::new(vertices, triangles)
}

fn push_fan(triangles: &mut Vec<[u32; 3]>, polygon: &[u32]) {
    for k in 1..polygon.len().saturating_sub(1) {
        triangles.push([polygon[0], polygon[k], polygon[k + 1]]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn off_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tet.off");
        let mesh = shapes::tetrahedron(1.0);
        save_mesh(&mesh, &p, MeshFormat::Off).unwrap();
        let loaded = load_mesh(&p).unwrap();
        assert_eq!(loaded.vertex_count(), 4);
        assert_eq!(loaded.triangle_count(), 4);
    }

    #[test]
    fn obj_with_zero_area_face_drops_it() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("box.obj");
        let mesh = shapes::box_mesh(Pt3::new(0.0, 0.0, 0.0), Pt3::new(1.0, 1.0, 1.0));
        save_mesh(&mesh, &p, MeshFormat::Obj).unwrap();
        // Append a degenerate face reusing an edge twice.
        let mut f = std::fs::OpenOptions::new().append(true).open(&p).unwrap();
        writeln!(f, "f 1 2 2").unwrap();
        drop(f);
        let loaded = load_mesh(&p).unwrap();
        assert_eq!(loaded.triangle_count(), 12 + 1 - 1);
    }

    #[test]
    fn ply_binary_and_ascii_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = shapes::icosphere(1, 0.5);
        for fmt in [MeshFormat::PlyBinary, MeshFormat::PlyAscii] {
            let p = dir.path().join("m.ply");
            save_mesh(&mesh, &p, fmt).unwrap();
            let loaded = load_mesh(&p).unwrap();
            assert_eq!(loaded.vertex_count(), mesh.vertex_count());
            assert_eq!(loaded.triangle_count(), mesh.triangle_count());
        }
    }

    #[test]
    fn truncated_ply_header_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.ply");
        std::fs::write(&p, "ply\nformat ascii 1.0\nelement vertex 4\n").unwrap();
        match load_mesh(&p) {
            Err(CoreError::MalformedFile { .. }) => {}
            other => panic!("expected malformed-file error, got {other:?}"),
        }
    }

    #[test]
    fn empty_obj_is_empty_geometry() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.obj");
        std::fs::write(&p, "# nothing\n").unwrap();
        match load_mesh(&p) {
            Err(CoreError::EmptyGeometry(_)) => {}
            other => panic!("expected empty-geometry error, got {other:?}"),
        }
    }

    #[test]
    fn obj_negative_indices_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("neg.obj");
        std::fs::write(&p, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        let loaded = load_mesh(&p).unwrap();
        assert_eq!(loaded.triangle_count(), 1);
    }
}
