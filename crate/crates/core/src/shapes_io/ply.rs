//! ASCII PLY subset: the `vertex` element's `x`, `y`, `z` properties.
//! Other elements (faces, edges) are skipped; binary encodings are refused.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::IoError;
use crate::transport::PointCloud;

struct Element {
    name: String,
    count: usize,
    /// Scalar property names; `None` marks a list property.
    properties: Vec<Option<String>>,
}

fn unsupported(msg: impl Into<String>) -> IoError {
    IoError::Unsupported(msg.into())
}

pub fn parse_ply(text: &str) -> Result<PointCloud, IoError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(unsupported("missing 'ply' magic line")),
    }

    let mut elements: Vec<Element> = Vec::new();
    let mut format_seen = false;
    loop {
        let Some((i, raw)) = lines.next() else {
            return Err(IoError::Parse { line: 0, message: "header has no end_header".into() });
        };
        let mut words = raw.split_whitespace();
        match words.next() {
            Some("format") => {
                match words.next() {
                    Some("ascii") => {}
                    Some(other) => return Err(unsupported(format!("{other} encoding (only ascii is supported)"))),
                    None => return Err(IoError::Parse { line: i + 1, message: "empty format line".into() }),
                }
                format_seen = true;
            }
            Some("element") => {
                let name = words.next().unwrap_or_default().to_string();
                let count = words
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| IoError::Parse { line: i + 1, message: "bad element count".into() })?;
                elements.push(Element { name, count, properties: Vec::new() });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| IoError::Parse { line: i + 1, message: "property before any element".into() })?;
                let rest: Vec<&str> = words.collect();
                match rest.as_slice() {
                    ["list", _, _, _name] => el.properties.push(None),
                    [_ty, name] => el.properties.push(Some((*name).to_string())),
                    _ => return Err(IoError::Parse { line: i + 1, message: "malformed property".into() }),
                }
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err(IoError::Parse { line: i + 1, message: format!("unknown header keyword {other:?}") }),
        }
    }
    if !format_seen {
        return Err(unsupported("no format line"));
    }

    let vertex = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| unsupported("no vertex element"))?;
    let column = |axis: &str| {
        elements[vertex]
            .properties
            .iter()
            .position(|p| p.as_deref() == Some(axis))
            .ok_or_else(|| unsupported(format!("vertex element has no '{axis}' property")))
    };
    let cols = [column("x")?, column("y")?, column("z")?];

    let mut points = Vec::with_capacity(elements[vertex].count);
    for (e, element) in elements.iter().enumerate() {
        for _ in 0..element.count {
            let (i, raw) = lines
                .next()
                .ok_or_else(|| IoError::Parse { line: 0, message: format!("file ends inside element {:?}", element.name) })?;
            if e != vertex {
                continue;
            }
            let fields: Vec<&str> = raw.split_whitespace().collect();
            if fields.len() < element.properties.len() {
                return Err(IoError::Parse { line: i + 1, message: "vertex line has too few values".into() });
            }
            let mut p = [0.0f64; 3];
            for (v, &c) in p.iter_mut().zip(&cols) {
                *v = fields[c]
                    .parse()
                    .map_err(|_| IoError::Parse { line: i + 1, message: format!("{:?} is not a number", fields[c]) })?;
            }
            points.push(p);
        }
    }
    if points.is_empty() {
        return Err(IoError::Parse { line: 0, message: "no vertices".into() });
    }
    Ok(PointCloud::new(points)?)
}

pub fn format_ply(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 48 + 128);
    out.push_str("ply\nformat ascii 1.0\n");
    writeln!(out, "element vertex {}", cloud.len()).expect("writing to a String");
    out.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
    for p in cloud.points() {
        writeln!(out, "{:.8e} {:.8e} {:.8e}", p[0], p[1], p[2]).expect("writing to a String");
    }
    out
}

pub fn read_ply(path: &Path) -> Result<PointCloud, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    // Binary bodies are not UTF-8; still report the header's encoding if we can.
    let text = String::from_utf8_lossy(&bytes);
    parse_ply(&text).map_err(|e| e.in_file(path))
}

pub fn write_ply(cloud: &PointCloud, path: &Path) -> Result<(), IoError> {
    fs::write(path, format_ply(cloud)).map_err(|e| IoError::io(path, e))
}
