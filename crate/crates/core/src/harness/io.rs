use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Writes through a sibling temp file and renames, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::ConfigInvalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(format!("creating {}", tmp.display()), e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming to {}", path.display()), e))
}

/// Matrix as CSV with a `# rows=<r> cols=<c>` header line.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = format!("# rows={} cols={}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::ConfigParse("empty matrix file".into()))?;
    let dims = header
        .strip_prefix("# ")
        .map(|h| {
            h.split_whitespace()
                .filter_map(|kv| kv.split_once('='))
                .map(|(k, v)| (k.to_string(), v.parse::<usize>()))
                .collect::<Vec<_>>()
        })
        .ok_or_else(|| Error::ConfigParse(format!("missing matrix header, got {header:?}")))?;
    let get = |key: &str| {
        dims.iter()
            .find(|(k, _)| k == key)
            .and_then(|(_, v)| v.clone().ok())
            .ok_or_else(|| Error::ConfigParse(format!("matrix header lacks {key}")))
    };
    let (rows, cols) = (get("rows")?, get("cols")?);
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        let before = data.len();
        for field in line.split(',') {
            let v = field
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::ConfigParse(format!("matrix row {i}: {e}")))?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(Error::DimError(format!("matrix row {i} has {} entries, expected {cols}", data.len() - before)));
        }
    }
    if data.len() != rows * cols {
        return Err(Error::DimError(format!("expected {rows} rows, found {}", data.len() / cols.max(1))));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    matrix_from_csv(&text)
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_atomic(path, matrix_to_csv(m).as_bytes())
}
