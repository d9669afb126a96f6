//! ASCII PLY 1.0, ASCII PCD v0.7 and plain XYZ readers/writers.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloudFormat {
    PlyAscii,
    PcdAscii,
    Xyz,
}

impl CloudFormat {
    /// Guess the format from a file extension (`.ply`, `.pcd`, `.xyz`/`.txt`).
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("ply") => Ok(Self::PlyAscii),
            Some("pcd") => Ok(Self::PcdAscii),
            Some("xyz") | Some("txt") => Ok(Self::Xyz),
            _ => Err(Error::UnsupportedFormat(path.display().to_string())),
        }
    }
}

impl FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ply" | "ply-ascii" => Ok(Self::PlyAscii),
            "pcd" | "pcd-ascii" => Ok(Self::PcdAscii),
            "xyz" => Ok(Self::Xyz),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)?;
    parse_cloud(&text, format)
}

pub fn save_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_cloud(cloud, format, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn parse_cloud(text: &str, format: CloudFormat) -> Result<PointCloud> {
    let (points, normals) = match format {
        CloudFormat::PlyAscii => parse_ply(text)?,
        CloudFormat::PcdAscii => parse_pcd(text)?,
        CloudFormat::Xyz => parse_xyz(text)?,
    };
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let cloud = match normals {
        Some(ns) => PointCloud::with_normals(points, ns),
        None => PointCloud::new(points),
    };
    cloud.map_err(|e| Error::Parse {
        line: 0,
        message: e.to_string(),
    })
}

/// Coordinates are written with Rust's shortest round-trip formatting, so a
/// save/load cycle reproduces every `f64` exactly.
pub fn write_cloud<W: Write>(cloud: &PointCloud, format: CloudFormat, out: &mut W) -> Result<()> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let n = cloud.len();
    let normals = cloud.normals();
    let mut header = String::new();
    match format {
        CloudFormat::PlyAscii => {
            header.push_str("ply\nformat ascii 1.0\n");
            let _ = writeln!(header, "element vertex {n}");
            header.push_str("property float x\nproperty float y\nproperty float z\n");
            if normals.is_some() {
                header.push_str("property float nx\nproperty float ny\nproperty float nz\n");
            }
            header.push_str("end_header\n");
        }
        CloudFormat::PcdAscii => {
            header.push_str("# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\n");
            if normals.is_some() {
                header.push_str("FIELDS x y z normal_x normal_y normal_z\n");
                header.push_str("SIZE 4 4 4 4 4 4\nTYPE F F F F F F\nCOUNT 1 1 1 1 1 1\n");
            } else {
                header.push_str("FIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n");
            }
            let _ = writeln!(header, "WIDTH {n}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0");
            let _ = writeln!(header, "POINTS {n}\nDATA ascii");
        }
        CloudFormat::Xyz => {}
    }
    out.write_all(header.as_bytes())?;

    let mut line = String::new();
    for (i, p) in cloud.points().iter().enumerate() {
        line.clear();
        let _ = write!(line, "{} {} {}", p.x, p.y, p.z);
        if let Some(ns) = normals {
            let nrm = ns[i];
            let _ = write!(line, " {} {} {}", nrm.x, nrm.y, nrm.z);
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

type Parsed = (Vec<Vector3<f64>>, Option<Vec<Vector3<f64>>>);

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_row(line_no: usize, line: &str, min_cols: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| parse_err(line_no, format!("not a number: {tok:?}")))
        })
        .collect::<Result<_>>()?;
    if vals.len() < min_cols {
        return Err(parse_err(
            line_no,
            format!("expected {min_cols} columns, found {}", vals.len()),
        ));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(parse_err(line_no, "non-finite value"));
    }
    Ok(vals)
}

/// Column positions of xyz and, when all three are present, the normal.
struct Columns {
    xyz: [usize; 3],
    normal: Option<[usize; 3]>,
    count: usize,
}

impl Columns {
    fn resolve(names: &[String], normal_names: [&str; 3], line: usize) -> Result<Self> {
        let find = |n: &str| names.iter().position(|x| x == n);
        let xyz = match (find("x"), find("y"), find("z")) {
            (Some(x), Some(y), Some(z)) => [x, y, z],
            _ => return Err(parse_err(line, "x, y and z fields are required")),
        };
        let normal = match (
            find(normal_names[0]),
            find(normal_names[1]),
            find(normal_names[2]),
        ) {
            (Some(a), Some(b), Some(c)) => Some([a, b, c]),
            _ => None,
        };
        Ok(Self {
            xyz,
            normal,
            count: names.len(),
        })
    }

    fn read(&self, vals: &[f64]) -> (Vector3<f64>, Option<Vector3<f64>>) {
        let p = Vector3::new(vals[self.xyz[0]], vals[self.xyz[1]], vals[self.xyz[2]]);
        let n = self
            .normal
            .map(|[a, b, c]| Vector3::new(vals[a], vals[b], vals[c]));
        (p, n)
    }
}

fn read_body<'a>(
    lines: impl Iterator<Item = (usize, &'a str)>,
    cols: &Columns,
    expected: usize,
) -> Result<Parsed> {
    let mut points = Vec::with_capacity(expected);
    let mut normals = cols.normal.map(|_| Vec::with_capacity(expected));
    let mut last_line = 0;
    for (no, line) in lines {
        last_line = no;
        if points.len() == expected {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let vals = parse_row(no, line, cols.count)?;
        let (p, n) = cols.read(&vals);
        points.push(p);
        if let (Some(ns), Some(n)) = (normals.as_mut(), n) {
            ns.push(n);
        }
    }
    if points.len() != expected {
        return Err(parse_err(
            last_line,
            format!("header declares {expected} points, found {}", points.len()),
        ));
    }
    Ok((points, normals))
}

fn parse_ply(text: &str) -> Result<Parsed> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(parse_err(1, "missing 'ply' magic")),
    }
    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut seen_vertex = false;
    let mut names = Vec::new();
    let mut header_done = false;
    for (no, line) in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => {}
            ["format", other, ..] => {
                return Err(parse_err(no, format!("unsupported PLY format {other}")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                if seen_vertex && *name != "vertex" {
                    // only elements before the vertex block would shift rows
                    in_vertex = false;
                    continue;
                }
                if *name != "vertex" {
                    return Err(parse_err(no, "elements before 'vertex' are not supported"));
                }
                let c = count
                    .parse::<usize>()
                    .map_err(|_| parse_err(no, "bad vertex count"))?;
                vertex_count = Some(c);
                in_vertex = true;
                seen_vertex = true;
            }
            ["property", "list", ..] if in_vertex => {
                return Err(parse_err(
                    no,
                    "list properties on vertices are not supported",
                ))
            }
            ["property", _ty, name] => {
                if in_vertex {
                    names.push(name.to_string());
                }
            }
            ["property", ..] if !in_vertex => {}
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(parse_err(no, format!("unexpected header line {line:?}"))),
        }
    }
    if !header_done {
        return Err(parse_err(0, "missing end_header"));
    }
    let count = vertex_count.ok_or_else(|| parse_err(0, "no vertex element"))?;
    let cols = Columns::resolve(&names, ["nx", "ny", "nz"], 0)?;
    read_body(lines, &cols, count)
}

fn parse_pcd(text: &str) -> Result<Parsed> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut names: Option<Vec<String>> = None;
    let mut points_decl = None;
    let mut width = None;
    let mut height = None;
    let mut data_ok = false;
    for (no, line) in lines.by_ref() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        let key = toks.next().unwrap_or_default().to_ascii_uppercase();
        let rest: Vec<&str> = toks.collect();
        let num = |v: Option<&&str>| -> Result<usize> {
            v.and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err(no, format!("bad {key} value")))
        };
        match key.as_str() {
            "VERSION" | "SIZE" | "TYPE" | "VIEWPOINT" => {}
            "COUNT" => {
                if rest.iter().any(|c| *c != "1") {
                    return Err(parse_err(no, "multi-count PCD fields are not supported"));
                }
            }
            "FIELDS" | "COLUMNS" => names = Some(rest.iter().map(|s| s.to_string()).collect()),
            "WIDTH" => width = Some(num(rest.first())?),
            "HEIGHT" => height = Some(num(rest.first())?),
            "POINTS" => points_decl = Some(num(rest.first())?),
            "DATA" => {
                if rest.first().map(|s| s.to_ascii_lowercase()) != Some("ascii".into()) {
                    return Err(parse_err(no, "only DATA ascii is supported"));
                }
                data_ok = true;
                break;
            }
            _ => return Err(parse_err(no, format!("unknown PCD header key {key}"))),
        }
    }
    if !data_ok {
        return Err(parse_err(0, "missing DATA line"));
    }
    let names = names.ok_or_else(|| parse_err(0, "missing FIELDS"))?;
    let count = match (points_decl, width, height) {
        (Some(p), _, _) => p,
        (None, Some(w), Some(h)) => w * h,
        _ => return Err(parse_err(0, "missing POINTS")),
    };
    let cols = Columns::resolve(&names, ["normal_x", "normal_y", "normal_z"], 0)?;
    read_body(lines, &cols, count)
}

fn parse_xyz(text: &str) -> Result<Parsed> {
    let mut points = Vec::new();
    let mut normals: Vec<Vector3<f64>> = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let vals = parse_row(no, trimmed, 3)?;
        if vals.len() != 3 && vals.len() != 6 {
            return Err(parse_err(
                no,
                format!("expected 3 or 6 values, found {}", vals.len()),
            ));
        }
        match width {
            None => width = Some(vals.len()),
            Some(w) if w != vals.len() => {
                return Err(parse_err(no, "rows mix 3- and 6-column layouts"))
            }
            _ => {}
        }
        points.push(Vector3::new(vals[0], vals[1], vals[2]));
        if vals.len() == 6 {
            normals.push(Vector3::new(vals[3], vals[4], vals[5]));
        }
    }
    let normals = (width == Some(6)).then_some(normals);
    Ok((points, normals))
}
