//! Edge-list datasets with a JSON manifest.
//!
//! A manifest lists one edge-list file per slice, relative to the manifest's
//! directory. Each non-blank line of an edge list is `u,v,w`, or `u,v` for
//! weight one, with 0-based node ids; `#` starts a comment line. Undirected
//! files may give each edge once.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::GraphTensor;

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: String,
    pub p: usize,
    #[serde(rename = "T")]
    pub num_slices: usize,
    pub directed: bool,
    pub graph_files: Vec<String>,
}

impl DatasetManifest {
    fn validate(&self, file: &Path) -> Result<()> {
        let fail = |message: String| Error::Manifest {
            file: file.to_path_buf(),
            message,
        };
        if self.format_version != FORMAT_VERSION {
            return Err(fail(format!(
                "unsupported format_version {:?}",
                self.format_version
            )));
        }
        if self.p == 0 {
            return Err(fail("p must be positive".into()));
        }
        if self.num_slices == 0 || self.graph_files.len() != self.num_slices {
            return Err(fail(format!(
                "T = {} but {} graph files are listed",
                self.num_slices,
                self.graph_files.len()
            )));
        }
        Ok(())
    }
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        file: path.to_path_buf(),
        message: e.to_string(),
    })?;
    manifest.validate(path)?;
    Ok(manifest)
}

/// Parses one edge list into a dense `p × p` adjacency matrix.
pub fn parse_edge_list(text: &str, file: &Path, p: usize, directed: bool) -> Result<DMatrix<f64>> {
    let mut a = DMatrix::zeros(p, p);
    let mut seen: HashMap<(usize, usize), f64> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            file: file.to_path_buf(),
            line,
            message,
        };
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(parse_err(format!(
                "expected \"u,v\" or \"u,v,w\", got {content:?}"
            )));
        }
        let node = |s: &str| -> Result<usize> {
            let n: usize = s
                .parse()
                .map_err(|_| parse_err(format!("invalid node id {s:?}")))?;
            if n >= p {
                return Err(Error::NodeIdOutOfRange {
                    file: file.to_path_buf(),
                    line,
                    node: n,
                    p,
                });
            }
            Ok(n)
        };
        let (u, v) = (node(fields[0])?, node(fields[1])?);
        let w = match fields.get(2) {
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|w| w.is_finite())
                .ok_or_else(|| parse_err(format!("invalid weight {s:?}")))?,
            None => 1.0,
        };
        let key = if directed {
            (u, v)
        } else {
            (u.min(v), u.max(v))
        };
        if let Some(&prev) = seen.get(&key) {
            if prev != w {
                if directed {
                    return Err(parse_err(format!("edge ({u}, {v}) listed twice")));
                }
                return Err(Error::Asymmetry {
                    file: file.to_path_buf(),
                    u: key.0,
                    v: key.1,
                });
            }
        }
        seen.insert(key, w);
        a[(u, v)] = w;
        if !directed {
            a[(v, u)] = w;
        }
    }
    Ok(a)
}

pub fn load_dataset(manifest_path: &Path) -> Result<GraphTensor> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let slices = manifest
        .graph_files
        .iter()
        .map(|rel| {
            let file = base.join(rel);
            let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
            parse_edge_list(&text, &file, manifest.p, manifest.directed)
        })
        .collect::<Result<Vec<_>>>()?;
    GraphTensor::new(slices, manifest.directed)
}

/// Edge list of one slice. Undirected slices list each edge once with
/// `u ≤ v`; zero weights are omitted. Weights use the shortest exact decimal.
pub fn format_edge_list(a: &DMatrix<f64>, directed: bool) -> String {
    let mut out = String::new();
    for u in 0..a.nrows() {
        let start = if directed { 0 } else { u };
        for v in start..a.ncols() {
            let w = a[(u, v)];
            if w != 0.0 {
                out.push_str(&format!("{u},{v},{w}\n"));
            }
        }
    }
    out
}

/// Writes `bytes` to a temporary file beside `path` and renames it in place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Writes `<prefix>_<t>.csv` edge lists and `manifest.json` into `dir`,
/// returning the manifest path.
pub fn write_dataset(dir: &Path, x: &GraphTensor, prefix: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let width = x.num_slices().to_string().len().max(3);
    let mut graph_files = Vec::with_capacity(x.num_slices());
    for (t, slice) in x.slices().iter().enumerate() {
        let name = format!("{prefix}_{t:0width$}.csv");
        atomic_write(
            &dir.join(&name),
            format_edge_list(slice, x.is_directed()).as_bytes(),
        )?;
        graph_files.push(name);
    }
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION.into(),
        p: x.p(),
        num_slices: x.num_slices(),
        directed: x.is_directed(),
        graph_files,
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn manifest(dir: &Path, p: usize, directed: bool, files: &[(&str, &str)]) -> PathBuf {
        for (name, body) in files {
            fs::write(dir.join(name), body).unwrap();
        }
        let m = DatasetManifest {
            format_version: "1".into(),
            p,
            num_slices: files.len(),
            directed,
            graph_files: files.iter().map(|(n, _)| n.to_string()).collect(),
        };
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
        path
    }

    #[test]
    fn minimal_and_empty_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = manifest(dir.path(), 3, false, &[("a.csv", "0,1\n"), ("b.csv", "")]);
        let x = load_dataset(&path).unwrap();
        assert_eq!(x.slice(0)[(0, 1)], 1.0);
        assert_eq!(x.slice(0)[(1, 0)], 1.0);
        assert_eq!(x.slice(0).sum(), 2.0);
        assert_eq!(x.slice(1).sum(), 0.0);
    }

    #[test]
    fn manifest_uses_capital_t() {
        let json = r#"{"format_version":"1","p":2,"T":1,"directed":false,"graph_files":["g.csv"]}"#;
        let m: DatasetManifest = serde_json::from_str(json).unwrap();
        assert_eq!(m.num_slices, 1);
        assert!(serde_json::to_string(&m).unwrap().contains("\"T\":1"));
    }

    #[test]
    fn parse_errors_carry_locations() {
        let f = Path::new("g.csv");
        let err = parse_edge_list("0,1\n\n1,x\n", f, 3, false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().starts_with("g.csv:3:"));
        assert!(matches!(
            parse_edge_list("0,5\n", f, 3, false),
            Err(Error::NodeIdOutOfRange {
                line: 1,
                node: 5,
                ..
            })
        ));
        assert!(matches!(
            parse_edge_list("0,1,2\n1,0,3\n", f, 3, false),
            Err(Error::Asymmetry { u: 0, v: 1, .. })
        ));
        assert!(parse_edge_list("0,1,2\n1,0,2\n", f, 3, false).is_ok());
        assert!(matches!(
            parse_edge_list("0,1,nan\n", f, 3, false),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_edge_list("0,1,2,3\n", f, 3, false),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn bad_manifests() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(
            &path,
            r#"{"format_version":"2","p":2,"T":1,"directed":false,"graph_files":["g"]}"#,
        )
        .unwrap();
        assert!(matches!(read_manifest(&path), Err(Error::Manifest { .. })));
        fs::write(
            &path,
            r#"{"format_version":"1","p":2,"T":2,"directed":false,"graph_files":["g"]}"#,
        )
        .unwrap();
        assert!(matches!(read_manifest(&path), Err(Error::Manifest { .. })));
        let path = manifest(dir.path(), 2, false, &[("a.csv", "")]);
        fs::remove_file(dir.path().join("a.csv")).unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Io { .. })));
    }

    #[test]
    fn roundtrip_random_tensors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for directed in [false, true] {
            let slices: Vec<DMatrix<f64>> = (0..4)
                .map(|_| {
                    let mut a = DMatrix::from_fn(6, 6, |_, _| {
                        if rng.random_bool(0.4) {
                            rng.random_range(-2.0..5.0)
                        } else {
                            0.0
                        }
                    });
                    if !directed {
                        a = &a + a.transpose();
                        a.fill_diagonal(0.0);
                    }
                    a
                })
                .collect();
            let x = GraphTensor::new(slices, directed).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = write_dataset(dir.path(), &x, "graph").unwrap();
            let y = load_dataset(&path).unwrap();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        atomic_write(&path, b"first").unwrap();
        atomic_write(&path, b"second").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
