//! ASCII PLY point clouds. Only the `vertex` element is read; `x y z` are
//! required and `red green blue` are picked up when all three are present.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use super::{IoError, read_text, write_file};
use crate::scene::PointCloud;

pub fn load_ply(path: &Path) -> Result<PointCloud, IoError> {
    parse_ply(&read_text(path)?, path)
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<String>,
}

pub fn parse_ply(text: &str, path: &Path) -> Result<PointCloud, IoError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(IoError::schema(path, "missing `ply` magic")),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut header_done = false;
    for (i, raw) in lines.by_ref() {
        let mut it = raw.split_whitespace();
        match it.next() {
            Some("format") => {
                if it.next() != Some("ascii") {
                    return Err(IoError::schema(path, "only ascii PLY is supported"));
                }
            }
            Some("element") => {
                let name = it.next().unwrap_or_default().to_string();
                let count = super::field(path, i + 1, "element count", it.next())?;
                elements.push(Element { name, count, properties: Vec::new() });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| IoError::parse(path, i + 1, "property before element"))?;
                let tokens: Vec<&str> = it.collect();
                let name = tokens.last().ok_or_else(|| IoError::parse(path, i + 1, "property without name"))?;
                if tokens.first() == Some(&"list") && el.name == "vertex" {
                    return Err(IoError::parse(path, i + 1, "list properties on vertices are not supported"));
                }
                el.properties.push(name.to_string());
            }
            Some("end_header") => {
                header_done = true;
                break;
            }
            _ => {}
        }
    }
    if !header_done {
        return Err(IoError::schema(path, "missing end_header"));
    }
    // Elements are stored in header order; skip whatever precedes the vertices.
    let vertex_pos = elements.iter().position(|e| e.name == "vertex").ok_or_else(|| IoError::schema(path, "no vertex element"))?;
    let skip: usize = elements[..vertex_pos].iter().map(|e| e.count).sum();
    let vertex = &elements[vertex_pos];
    let col = |name: &str| vertex.properties.iter().position(|p| p == name);
    let (x, y, z) = match (col("x"), col("y"), col("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(IoError::schema(path, "vertex element lacks x, y or z")),
    };
    let rgb = match (col("red"), col("green"), col("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };

    let mut body = lines.filter(|(_, l)| !l.trim().is_empty()).skip(skip);
    let mut points = Vec::with_capacity(vertex.count);
    let mut colors = rgb.map(|_| Vec::with_capacity(vertex.count));
    for _ in 0..vertex.count {
        let (i, raw) = body.next().ok_or_else(|| IoError::schema(path, format!("expected {} vertices", vertex.count)))?;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.len() != vertex.properties.len() {
            return Err(IoError::parse(path, i + 1, format!("expected {} values, got {}", vertex.properties.len(), tokens.len())));
        }
        let num = |c: usize| super::field::<f64>(path, i + 1, &vertex.properties[c], Some(tokens[c]));
        points.push(Vector3::new(num(x)?, num(y)?, num(z)?));
        if let (Some(cols), Some(idx)) = (colors.as_mut(), rgb) {
            let channel = |c: usize| super::field::<u8>(path, i + 1, &vertex.properties[c], Some(tokens[c]));
            cols.push([channel(idx[0])?, channel(idx[1])?, channel(idx[2])?]);
        }
    }
    PointCloud::with_colors(points, colors).map_err(|e| IoError::schema(path, e.to_string()))
}

pub fn write_ply(cloud: &PointCloud, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "ply\nformat ascii 1.0\nelement vertex {}", cloud.len())?;
    writeln!(out, "property double x\nproperty double y\nproperty double z")?;
    if cloud.colors.is_some() {
        writeln!(out, "property uchar red\nproperty uchar green\nproperty uchar blue")?;
    }
    writeln!(out, "end_header")?;
    for (i, p) in cloud.points.iter().enumerate() {
        write!(out, "{} {} {}", p.x, p.y, p.z)?;
        if let Some(c) = &cloud.colors {
            write!(out, " {} {} {}", c[i][0], c[i][1], c[i][2])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_ply(cloud: &PointCloud, path: &Path) -> Result<(), IoError> {
    write_file(path, |out| write_ply(cloud, out))
}
