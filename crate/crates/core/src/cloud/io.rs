//! ASCII PLY and XYZ readers, ASCII PLY writer.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::PointCloud;
use crate::error::{GraspError, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    PlyAscii,
    Xyz,
}

impl CloudFormat {
    /// Guess from the file extension (`.ply`, anything else is XYZ).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("ply") => CloudFormat::PlyAscii,
            _ => CloudFormat::Xyz,
        }
    }
}

pub fn load_cloud(path: impl AsRef<Path>, format: CloudFormat) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| GraspError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match format {
        CloudFormat::PlyAscii => parse_ply(&text),
        CloudFormat::Xyz => parse_xyz(&text),
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| GraspError::Parse {
        line,
        message: format!("`{tok}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(GraspError::Parse {
            line,
            message: format!("`{tok}` is not finite"),
        });
    }
    Ok(v)
}

/// Whitespace-separated `x y z` per line. `#` comments and blank lines are skipped;
/// columns past the third are ignored.
pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(GraspError::Parse {
                line: line_no,
                message: format!("expected 3 coordinates, found {}", toks.len()),
            });
        }
        points.push(Vec3::new(
            parse_f64(toks[0], line_no)?,
            parse_f64(toks[1], line_no)?,
            parse_f64(toks[2], line_no)?,
        ));
    }
    if points.is_empty() {
        return Err(GraspError::EmptyCloud);
    }
    Ok(PointCloud::new(points))
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<String>,
}

/// ASCII PLY. Only the `vertex` element is read; properties other than
/// `x y z nx ny nz confidence` are ignored, as are other elements.
pub fn parse_ply(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let perr = |line: usize, message: &str| GraspError::Parse {
        line,
        message: message.to_string(),
    };

    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        Some((n, _)) => return Err(perr(n, "missing `ply` magic")),
        None => return Err(GraspError::EmptyCloud),
    }

    let mut elements: Vec<Element> = Vec::new();
    let mut header_done = false;
    for (n, raw) in lines.by_ref() {
        let toks: Vec<&str> = raw.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["format", "ascii", _] => {}
            ["format", other, ..] => {
                return Err(perr(n, &format!("unsupported PLY format `{other}`")));
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| perr(n, "element count is not an integer"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", ..] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| perr(n, "property before element"))?;
                el.properties.push(String::from("<list>"));
            }
            ["property", _ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| perr(n, "property before element"))?;
                el.properties.push(name.to_string());
            }
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(perr(n, &format!("unrecognized header line `{}`", raw.trim()))),
        }
    }
    if !header_done {
        return Err(perr(text.lines().count(), "missing end_header"));
    }

    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut confidence = Vec::new();
    let mut has_normals = false;
    let mut has_confidence = false;

    for el in &elements {
        let is_vertex = el.name == "vertex";
        let col = |name: &str| el.properties.iter().position(|p| p == name);
        let xyz = [col("x"), col("y"), col("z")];
        let nxyz = [col("nx"), col("ny"), col("nz")];
        let conf = col("confidence");
        if is_vertex {
            if xyz.iter().any(Option::is_none) {
                return Err(perr(0, "vertex element lacks x/y/z properties"));
            }
            has_normals = nxyz.iter().all(Option::is_some);
            has_confidence = conf.is_some();
        }
        let mut read = 0;
        while read < el.count {
            let (n, raw) = lines
                .next()
                .ok_or_else(|| perr(text.lines().count(), "unexpected end of file in body"))?;
            if raw.trim().is_empty() {
                continue;
            }
            read += 1;
            if !is_vertex {
                continue;
            }
            let toks: Vec<&str> = raw.split_whitespace().collect();
            if toks.len() < el.properties.len() {
                return Err(perr(
                    n,
                    &format!("expected {} values, found {}", el.properties.len(), toks.len()),
                ));
            }
            let get = |c: Option<usize>| parse_f64(toks[c.unwrap()], n);
            points.push(Vec3::new(get(xyz[0])?, get(xyz[1])?, get(xyz[2])?));
            if has_normals {
                normals.push(Vec3::new(get(nxyz[0])?, get(nxyz[1])?, get(nxyz[2])?));
            }
            if has_confidence {
                confidence.push(get(conf)?);
            }
        }
    }

    if points.is_empty() {
        return Err(GraspError::EmptyCloud);
    }
    let mut cloud = PointCloud::new(points);
    if has_normals {
        cloud = cloud.with_normals(normals)?;
    }
    if has_confidence {
        cloud = cloud.with_confidence(confidence)?;
    }
    Ok(cloud)
}

/// Write ASCII PLY. `labels`, when given, adds an integer `region` property.
pub fn write_ply<W: Write>(out: &mut W, cloud: &PointCloud, labels: Option<&[i64]>) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != cloud.len() {
            return Err(GraspError::DimensionMismatch {
                expected: cloud.len(),
                actual: l.len(),
            });
        }
    }
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", cloud.len());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.normals().is_some() {
        s.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    if cloud.confidence().is_some() {
        s.push_str("property double confidence\n");
    }
    if labels.is_some() {
        s.push_str("property int region\n");
    }
    s.push_str("end_header\n");
    for (i, p) in cloud.points().iter().enumerate() {
        let _ = write!(s, "{} {} {}", p.x, p.y, p.z);
        if let Some(n) = cloud.normals() {
            let _ = write!(s, " {} {} {}", n[i].x, n[i].y, n[i].z);
        }
        if let Some(c) = cloud.confidence() {
            let _ = write!(s, " {}", c[i]);
        }
        if let Some(l) = labels {
            let _ = write!(s, " {}", l[i]);
        }
        s.push('\n');
    }
    out.write_all(s.as_bytes()).map_err(|source| GraspError::Io {
        path: "<writer>".into(),
        source,
    })
}
