//! Loading and writing images, label maps and JSON documents.

use std::fs;
use std::path::{Path, PathBuf};

use segfusion_core::{MultibandImage, Partition};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::formats::{encode_csv, encode_pgm, parse_csv, parse_pgm, FileFormat, Raster};

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("document serializes");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, to_json(value))
}

/// Absolute form of `path`; falls back to joining the working directory when
/// the file does not exist yet.
pub fn absolute(path: &Path) -> PathBuf {
    fs::canonicalize(path).unwrap_or_else(|_| {
        std::env::current_dir()
            .map(|d| d.join(path))
            .unwrap_or_else(|_| path.to_path_buf())
    })
}

/// One band file of an image, with an optional display name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandEntry {
    Path(PathBuf),
    Named { path: PathBuf, name: Option<String> },
}

impl BandEntry {
    fn path(&self) -> &Path {
        match self {
            BandEntry::Path(p) | BandEntry::Named { path: p, .. } => p,
        }
    }

    fn name(&self) -> Option<&str> {
        match self {
            BandEntry::Path(_) => None,
            BandEntry::Named { name, .. } => name.as_deref(),
        }
    }
}

/// JSON image manifest. Relative band paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageManifest {
    pub bands: Vec<BandEntry>,
}

/// Reads one band as reals. PGM samples are taken verbatim.
pub fn load_band(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    match FileFormat::from_path(path)? {
        FileFormat::Pgm => {
            let r = parse_pgm(&read_bytes(path)?, path)?;
            Ok((
                r.width,
                r.height,
                r.samples.into_iter().map(f64::from).collect(),
            ))
        }
        FileFormat::Csv => {
            let text = read_text(path)?;
            let g = parse_csv(&text, path)?;
            let values = g
                .tokens
                .iter()
                .map(|t| match t.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(CliError::format(
                        path,
                        format!("non-numeric sample `{}`", t),
                    )),
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((g.width, g.height, values))
        }
    }
}

/// Loads a multiband image from a JSON manifest listing one file per band.
pub fn load_image(manifest: &Path) -> Result<MultibandImage<f64>> {
    let doc: ImageManifest = read_json(manifest)?;
    if doc.bands.is_empty() {
        return Err(CliError::format(manifest, "image manifest lists no bands"));
    }
    let base = manifest.parent().unwrap_or(Path::new(""));
    let mut dims = None;
    let mut bands = Vec::with_capacity(doc.bands.len());
    for entry in &doc.bands {
        let path = base.join(entry.path());
        let (w, h, values) = load_band(&path)?;
        match dims {
            None => dims = Some((w, h)),
            Some(d) if d != (w, h) => {
                return Err(CliError::format(
                    &path,
                    format!("band is {}x{}, expected {}x{}", w, h, d.0, d.1),
                ))
            }
            _ => {}
        }
        bands.push(values);
    }
    let (w, h) = dims.expect("at least one band");
    let img = MultibandImage::new(w, h, bands)?;
    if doc.bands.iter().any(|b| b.name().is_some()) {
        let names = doc
            .bands
            .iter()
            .enumerate()
            .map(|(i, b)| {
                b.name()
                    .map_or_else(|| format!("band{}", i), str::to_string)
            })
            .collect();
        return Ok(img.with_band_names(names)?);
    }
    Ok(img)
}

/// Raw integer labels of a label-map file.
pub fn read_raw_labels(path: &Path) -> Result<(usize, usize, Vec<u64>)> {
    match FileFormat::from_path(path)? {
        FileFormat::Pgm => {
            let r = parse_pgm(&read_bytes(path)?, path)?;
            Ok((
                r.width,
                r.height,
                r.samples.into_iter().map(u64::from).collect(),
            ))
        }
        FileFormat::Csv => {
            let text = read_text(path)?;
            let g = parse_csv(&text, path)?;
            let raw = g
                .tokens
                .iter()
                .map(|t| {
                    t.parse::<u64>().map_err(|_| {
                        CliError::format(
                            path,
                            format!("label `{}` is not a non-negative integer", t),
                        )
                    })
                })
                .collect::<Result<Vec<u64>>>()?;
            Ok((g.width, g.height, raw))
        }
    }
}

/// Loads a label map and densifies its labels to `0..C`. The returned
/// mapping lists the original value of every dense label.
pub fn load_label_map(path: &Path) -> Result<(Partition, Vec<u64>)> {
    let (w, h, raw) = read_raw_labels(path)?;
    Partition::densify(&raw, w, h).map_err(|e| CliError::format(path, e.to_string()))
}

/// Writes raw integer values as a label map in the format chosen by the
/// extension. PGM output is binary unless `ascii`.
pub fn write_raw_labels(
    path: &Path,
    width: usize,
    height: usize,
    values: &[u64],
    ascii: bool,
) -> Result<()> {
    match FileFormat::from_path(path)? {
        FileFormat::Pgm => {
            let max = values.iter().copied().max().unwrap_or(0);
            if max > 65535 {
                return Err(CliError::format(
                    path,
                    format!("label {} does not fit a 16-bit PGM", max),
                ));
            }
            let r = Raster {
                width,
                height,
                maxval: max.max(1) as u32,
                samples: values.iter().map(|&v| v as u32).collect(),
            };
            write_file(path, encode_pgm(&r, ascii))
        }
        FileFormat::Csv => write_file(path, encode_csv(width, height, values)),
    }
}

pub fn write_label_map(path: &Path, p: &Partition, ascii: bool) -> Result<()> {
    let values: Vec<u64> = p.labels().iter().map(|&l| u64::from(l)).collect();
    write_raw_labels(path, p.width(), p.height(), &values, ascii)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn label_maps_round_trip_through_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let p = Partition::new(vec![0, 2, 1, 1, 0, 2], 3, 2, None).unwrap();
        for name in ["a.pgm", "a.csv"] {
            let path = dir.path().join(name);
            write_label_map(&path, &p, false).unwrap();
            let (q, mapping) = load_label_map(&path).unwrap();
            assert_eq!(q, p);
            assert_eq!(mapping, vec![0, 1, 2]);
        }
    }

    #[test]
    fn sparse_labels_are_densified() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_file(&path, "width=2\nheight=2\n255\n7\n7\n255\n").unwrap();
        let (p, mapping) = load_label_map(&path).unwrap();
        assert_eq!(p.labels(), &[1, 0, 0, 1]);
        assert_eq!(mapping, vec![7, 255]);
    }

    #[test]
    fn bad_label_values_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_file(&path, "width=2\nheight=1\n-1\n2\n").unwrap();
        assert_eq!(load_label_map(&path).unwrap_err().code(), "malformed_input");
        write_file(&path, "width=2\nheight=1\n1.5\n2\n").unwrap();
        assert!(load_label_map(&path).is_err());
        let big = dir.path().join("big.pgm");
        assert!(write_raw_labels(&big, 1, 1, &[70000], false).is_err());
    }

    #[test]
    fn image_manifest_resolves_relative_bands() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            &dir.path().join("b/one.csv"),
            "width=2\nheight=1\n0.5\n1.5\n",
        )
        .unwrap();
        write_raw_labels(&dir.path().join("b/two.pgm"), 2, 1, &[3, 9], false).unwrap();
        let m = dir.path().join("img.json");
        write_file(
            &m,
            r#"{"bands": ["b/one.csv", {"path": "b/two.pgm", "name": "nir"}]}"#,
        )
        .unwrap();
        let img = load_image(&m).unwrap();
        assert_eq!((img.width(), img.height(), img.num_bands()), (2, 1, 2));
        assert_eq!(img.band(0), &[0.5, 1.5]);
        assert_eq!(img.band(1), &[3.0, 9.0]);
        assert_eq!(
            img.band_names().unwrap(),
            &["band0".to_string(), "nir".to_string()]
        );
    }

    #[test]
    fn mismatched_bands_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_file(&dir.path().join("a.csv"), "width=2\nheight=1\n0\n1\n").unwrap();
        write_file(&dir.path().join("b.csv"), "width=1\nheight=2\n0\n1\n").unwrap();
        let m = dir.path().join("img.json");
        write_file(&m, r#"{"bands": ["a.csv", "b.csv"]}"#).unwrap();
        assert!(load_image(&m).is_err());
        write_file(&m, r#"{"bands": []}"#).unwrap();
        assert!(load_image(&m).is_err());
    }

    proptest! {
        #[test]
        fn csv_label_round_trip(w in 1usize..8, h in 1usize..8, vals in proptest::collection::vec(0u64..100_000, 64)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("x.csv");
            let values = &vals[..w * h];
            write_raw_labels(&path, w, h, values, false).unwrap();
            prop_assert_eq!(read_raw_labels(&path).unwrap(), (w, h, values.to_vec()));
        }
    }
}
