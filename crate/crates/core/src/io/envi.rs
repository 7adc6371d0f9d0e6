//! Ingestion of ENVI band-sequential `float32` little-endian cubes.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::decode_f32;
use crate::data::Hypercube;
use crate::error::{Error, Result};

const DATA_EXTENSIONS: [&str; 5] = ["", "img", "dat", "raw", "bsq"];

/// Locates the `.hdr` sidecar of a data file: `<file>.hdr`, then the
/// file name with its extension replaced by `hdr`.
pub(crate) fn sidecar_header(data: &Path) -> Option<PathBuf> {
    let mut appended = data.as_os_str().to_owned();
    appended.push(".hdr");
    let appended = PathBuf::from(appended);
    if appended.is_file() {
        return Some(appended);
    }
    let replaced = data.with_extension("hdr");
    if replaced != data && replaced.is_file() {
        return Some(replaced);
    }
    None
}

fn data_for_header(hdr: &Path) -> Option<PathBuf> {
    let stem = hdr.with_extension("");
    DATA_EXTENSIONS
        .iter()
        .map(|ext| if ext.is_empty() { stem.clone() } else { stem.with_extension(ext) })
        .find(|p| p.is_file())
}

/// Parses `key = value` pairs; `{...}` values may span lines. Keys are
/// lower-cased.
pub(crate) fn parse_header(text: &str) -> Result<HashMap<String, String>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(first) if first.trim() == "ENVI" => {}
        _ => return Err(Error::MalformedHeader("ENVI header must start with 'ENVI'".into())),
    }
    let mut fields = HashMap::new();
    let mut pending: Option<(String, String)> = None;
    for line in lines {
        if let Some((key, mut value)) = pending.take() {
            value.push(' ');
            value.push_str(line.trim());
            if line.contains('}') {
                fields.insert(key, value);
            } else {
                pending = Some((key, value));
            }
            continue;
        }
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::MalformedHeader(format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().to_string();
        if value.starts_with('{') && !value.contains('}') {
            pending = Some((key, value));
        } else {
            fields.insert(key, value);
        }
    }
    if pending.is_some() {
        return Err(Error::MalformedHeader("unterminated '{' in header".into()));
    }
    Ok(fields)
}

fn required_usize(fields: &HashMap<String, String>, key: &str) -> Result<usize> {
    let raw = fields
        .get(key)
        .ok_or_else(|| Error::MalformedHeader(format!("missing '{key}'")))?;
    raw.parse::<usize>()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::MalformedHeader(format!("bad '{key}' value '{raw}'")))
}

fn expect(fields: &HashMap<String, String>, key: &str, wanted: &str) -> Result<()> {
    match fields.get(key) {
        Some(v) if v.eq_ignore_ascii_case(wanted) => Ok(()),
        Some(v) => Err(Error::MalformedHeader(format!(
            "unsupported {key} '{v}' (only {wanted})"
        ))),
        None => Err(Error::MalformedHeader(format!("missing '{key}'"))),
    }
}

/// Reads an ENVI cube given either the data file or the `.hdr` path.
pub fn read_envi(path: impl AsRef<Path>) -> Result<Hypercube> {
    let path = path.as_ref();
    let is_header = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("hdr"));
    let (hdr, data) = if is_header {
        let data = data_for_header(path)
            .ok_or_else(|| Error::MalformedHeader(format!("no data file next to {}", path.display())))?;
        (path.to_path_buf(), data)
    } else {
        let hdr = sidecar_header(path)
            .ok_or_else(|| Error::MalformedHeader(format!("no .hdr sidecar for {}", path.display())))?;
        (hdr, path.to_path_buf())
    };
    let text = fs::read_to_string(&hdr).map_err(|e| Error::io(&hdr, e))?;
    let fields = parse_header(&text)?;
    let width = required_usize(&fields, "samples")?;
    let height = required_usize(&fields, "lines")?;
    let bands = required_usize(&fields, "bands")?;
    expect(&fields, "data type", "4")?;
    expect(&fields, "interleave", "bsq")?;
    expect(&fields, "byte order", "0")?;
    let offset = match fields.get("header offset") {
        Some(raw) => raw
            .parse::<usize>()
            .map_err(|_| Error::MalformedHeader(format!("bad 'header offset' value '{raw}'")))?,
        None => 0,
    };
    let bytes = fs::read(&data).map_err(|e| Error::io(&data, e))?;
    let payload = bytes.get(offset..).unwrap_or(&[]);
    let values = decode_f32(payload, height * width * bands)?;
    Hypercube::new(height, width, bands, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "ENVI\ndescription = {\n  test cube }\nsamples = 2\nlines = 2\nbands = 2\nheader offset = 0\nfile type = ENVI Standard\ndata type = 4\ninterleave = bsq\nbyte order = 0\n";

    #[test]
    fn reads_hand_assembled_bsq() {
        let dir = tempfile::tempdir().unwrap();
        let data_path = dir.path().join("cube.img");
        // band 0: [[1,2],[3,4]], band 1: [[5,6],[7,8]]
        let values = [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let payload: Vec<u8> = values.iter().flat_map(|x| x.to_le_bytes()).collect();
        assert_eq!(payload.len(), 32);
        fs::write(&data_path, &payload).unwrap();
        fs::write(dir.path().join("cube.hdr"), HEADER).unwrap();

        let cube = read_envi(&data_path).unwrap();
        assert_eq!((cube.height(), cube.width(), cube.bands()), (2, 2, 2));
        assert_eq!(cube.get(0, 1, 0), 3.0);
        assert_eq!(cube.get(1, 0, 1), 6.0);
        assert_eq!(cube.pixel(3), vec![4.0, 8.0]);

        let via_header = read_envi(dir.path().join("cube.hdr")).unwrap();
        assert_eq!(via_header, cube);
        let via_dispatch = crate::io::read_hypercube(&data_path).unwrap();
        assert_eq!(via_dispatch, cube);
    }

    #[test]
    fn rejects_unsupported_layouts() {
        for (key, bad) in [("interleave = bsq", "interleave = bil"), ("data type = 4", "data type = 5"), ("byte order = 0", "byte order = 1")] {
            let header = HEADER.replace(key, bad);
            let fields = parse_header(&header).unwrap();
            let checked = expect(&fields, "interleave", "bsq")
                .and_then(|_| expect(&fields, "data type", "4"))
                .and_then(|_| expect(&fields, "byte order", "0"));
            assert!(matches!(checked, Err(Error::MalformedHeader(_))), "{bad}");
        }
        assert!(matches!(parse_header("samples = 2\n"), Err(Error::MalformedHeader(_))));
    }
}
