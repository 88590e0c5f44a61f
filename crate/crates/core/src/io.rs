//! ASCII point-cloud and embedding files.
//!
//! Clouds are whitespace-separated `x y z [semantic] [instance]` lines.
//! Blank lines and lines starting with `#` are skipped.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::cloud::{Point3, PointCloud, SemanticClass};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    /// 3 to 5 columns, consistent across the file.
    Pheno4dTxt,
    /// Coordinates only; any further columns are ignored.
    Xyz,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("xyz") => CloudFormat::Xyz,
            _ => CloudFormat::Pheno4dTxt,
        }
    }
}

/// Maps raw semantic column values to classes. `None` drops the point
/// (used for ground).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMap {
    entries: BTreeMap<i64, Option<SemanticClass>>,
    /// Values at or above this are Leaf, and the value doubles as the leaf's
    /// instance id when the file has no instance column.
    leaf_instances_from: Option<i64>,
}

impl Default for ClassMap {
    /// The ids written by this crate: Leaf=0, Stem=1.
    fn default() -> Self {
        ClassMap::new([(0, Some(SemanticClass::Leaf)), (1, Some(SemanticClass::Stem))])
    }
}

impl ClassMap {
    pub fn new(entries: impl IntoIterator<Item = (i64, Option<SemanticClass>)>) -> Self {
        ClassMap {
            entries: entries.into_iter().collect(),
            leaf_instances_from: None,
        }
    }

    /// Single-column tomato annotation: 0 ground (dropped), 1 stem, every
    /// value from 2 up is one leaf.
    pub fn pheno4d_instances() -> Self {
        let mut m = ClassMap::new([(0, None), (1, Some(SemanticClass::Stem))]);
        m.leaf_instances_from = Some(2);
        m
    }

    /// Pheno4D tomato convention: 0 ground (dropped), 1 stem, 2 leaf.
    pub fn pheno4d() -> Self {
        ClassMap::new([
            (0, None),
            (1, Some(SemanticClass::Stem)),
            (2, Some(SemanticClass::Leaf)),
        ])
    }

    /// Parses `raw:class` pairs separated by commas, e.g. `0:ground,1:stem,2:leaf`.
    /// `2+:leaf` makes every value from 2 up its own leaf instance.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut leaf_instances_from = None;
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (raw, class) = item
                .split_once(':')
                .ok_or_else(|| Error::param("class_map", format!("bad entry `{item}`")))?;
            if let Some(start) = raw.trim().strip_suffix('+') {
                if !class.trim().eq_ignore_ascii_case("leaf") {
                    return Err(Error::param("class_map", format!("`{item}`: only leaf takes a range")));
                }
                let start: i64 = start
                    .trim()
                    .parse()
                    .map_err(|_| Error::param("class_map", format!("bad id `{raw}`")))?;
                leaf_instances_from = Some(start);
                continue;
            }
            let raw: i64 = raw
                .trim()
                .parse()
                .map_err(|_| Error::param("class_map", format!("bad id `{raw}`")))?;
            let class = match class.trim().to_ascii_lowercase().as_str() {
                "leaf" => Some(SemanticClass::Leaf),
                "stem" => Some(SemanticClass::Stem),
                "ground" | "ignore" => None,
                other => {
                    return Err(Error::param("class_map", format!("unknown class `{other}`")))
                }
            };
            entries.insert(raw, class);
        }
        if entries.is_empty() && leaf_instances_from.is_none() {
            return Err(Error::param("class_map", "no entries"));
        }
        Ok(ClassMap {
            entries,
            leaf_instances_from,
        })
    }

    fn lookup(&self, raw: i64) -> Option<Option<SemanticClass>> {
        match self.entries.get(&raw) {
            Some(c) => Some(*c),
            None => match self.leaf_instances_from {
                Some(start) if raw >= start => Some(Some(SemanticClass::Leaf)),
                _ => None,
            },
        }
    }

    /// Instance id implied by a raw semantic value, if this map encodes instances.
    fn implied_instance(&self, raw: i64) -> Option<u32> {
        let start = self.leaf_instances_from?;
        Some(if raw >= start && !self.entries.contains_key(&raw) { raw as u32 } else { 0 })
    }
}

pub fn read_cloud(path: &Path, format: CloudFormat, class_map: &ClassMap) -> Result<PointCloud> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_cloud(BufReader::new(file), format, class_map)
}

pub fn parse_cloud<R: Read>(
    reader: R,
    format: CloudFormat,
    class_map: &ClassMap,
) -> Result<PointCloud> {
    let reader = BufReader::new(reader);
    let mut points = Vec::new();
    let mut semantic = Vec::new();
    let mut instance = Vec::new();
    let mut columns: Option<usize> = None;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let ncol = match format {
            CloudFormat::Xyz => 3,
            CloudFormat::Pheno4dTxt => fields.len(),
        };
        if fields.len() < 3 || (format == CloudFormat::Pheno4dTxt && fields.len() > 5) {
            return Err(Error::Format {
                line: lineno,
                expected: columns.unwrap_or(3),
                found: fields.len(),
            });
        }
        match columns {
            None => columns = Some(ncol),
            Some(c) if c != ncol => {
                return Err(Error::Format {
                    line: lineno,
                    expected: c,
                    found: ncol,
                })
            }
            _ => {}
        }

        let mut xyz = [0.0; 3];
        for (k, f) in fields[..3].iter().enumerate() {
            xyz[k] = parse_real(f, lineno)?;
        }
        let p = Point3::from(xyz);

        if ncol >= 4 {
            let raw = parse_integral(fields[3], lineno)?;
            if ncol == 4 {
                if let Some(id) = class_map.implied_instance(raw) {
                    if class_map.lookup(raw).is_some_and(|c| c.is_some()) {
                        instance.push(id);
                    }
                }
            }
            match class_map.lookup(raw) {
                Some(Some(class)) => semantic.push(class),
                Some(None) => continue,
                None => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("semantic value {raw} is not in the class map"),
                    })
                }
            }
        }
        if ncol == 5 {
            let raw = parse_integral(fields[4], lineno)?;
            let id = u32::try_from(raw).map_err(|_| Error::Parse {
                line: lineno,
                message: format!("instance id {raw} must be a non-negative 32-bit integer"),
            })?;
            instance.push(id);
        }
        points.push(p);
    }

    let mut cloud = PointCloud::new(points)?;
    let ncol = columns.unwrap_or(3);
    if ncol >= 4 {
        cloud = cloud.with_semantic(semantic)?;
    }
    if ncol == 5 || (ncol == 4 && class_map.leaf_instances_from.is_some()) {
        cloud = cloud.with_instance(instance)?;
    }
    Ok(cloud)
}

fn parse_real(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("`{s}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("`{s}` is not finite"),
        });
    }
    Ok(v)
}

/// Integers may be written as `2` or `2.000000`.
fn parse_integral(s: &str, line: usize) -> Result<i64> {
    if let Ok(v) = s.parse::<i64>() {
        return Ok(v);
    }
    let v = parse_real(s, line)?;
    if v.fract() != 0.0 || v.abs() > 2f64.powi(53) {
        return Err(Error::Parse {
            line,
            message: format!("`{s}` is not an integer label"),
        });
    }
    Ok(v as i64)
}

/// Writes `x y z [semantic] [instance] [extra]`. Semantic ids are the crate's
/// own (Leaf=0, Stem=1). A missing semantic layer is written as nothing, so an
/// instance layer is only written when the semantic layer is present.
pub fn write_cloud(path: &Path, cloud: &PointCloud, extra: Option<&[u32]>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    format_cloud(&mut w, cloud, extra).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn format_cloud<W: Write>(
    w: &mut W,
    cloud: &PointCloud,
    extra: Option<&[u32]>,
) -> std::io::Result<()> {
    if let Some(e) = extra {
        assert_eq!(e.len(), cloud.len(), "extra column length");
    }
    for (i, p) in cloud.points().iter().enumerate() {
        write!(w, "{} {} {}", p.x, p.y, p.z)?;
        if let Some(s) = cloud.semantic() {
            write!(w, " {}", s[i].id())?;
            if let Some(inst) = cloud.instance() {
                write!(w, " {}", inst[i])?;
            }
        }
        if let Some(e) = extra {
            write!(w, " {}", e[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Embedding coordinates, one `y1 y2` pair per line.
pub fn write_embedding(path: &Path, y: &[[f64; 2]]) -> Result<()> {
    write_lines(path, y.iter().map(|p| format!("{} {}", p[0], p[1])))
}

pub fn read_embedding(path: &Path) -> Result<Vec<[f64; 2]>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 2 {
            return Err(Error::Format {
                line: lineno + 1,
                expected: 2,
                found: fields.len(),
            });
        }
        out.push([
            parse_real(fields[0], lineno + 1)?,
            parse_real(fields[1], lineno + 1)?,
        ]);
    }
    Ok(out)
}

/// Sidecar diagnostics: `iteration kl` per line.
pub fn write_kl_history(path: &Path, kl: &[f64]) -> Result<()> {
    write_lines(
        path,
        std::iter::once("# iteration kl".to_string())
            .chain(kl.iter().enumerate().map(|(i, k)| format!("{} {}", i + 1, k))),
    )
}

/// One integer per line.
pub fn write_label_column(path: &Path, labels: &[u32]) -> Result<()> {
    write_lines(path, labels.iter().map(|l| l.to_string()))
}

pub(crate) fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for l in lines {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
