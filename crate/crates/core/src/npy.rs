//! Reading and writing 2D float64 arrays in the numpy `.npy` format.
//!
//! Only format version 1.0, dtype `<f8`, C order and exactly two dimensions
//! are supported; anything else is rejected with [`Error::Format`].

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::conv::Field;
use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

pub fn write_npy<W: Write>(writer: &mut W, array: &Field) -> Result<()> {
    let (h, w) = array.dim();
    let mut dict = format!("{{'descr': '<f8', 'fortran_order': False, 'shape': ({h}, {w}), }}");
    // magic + version + u16 length, then the dict padded with spaces up to a
    // newline so the data starts aligned
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    let padding = (ALIGN - unpadded % ALIGN) % ALIGN;
    dict.extend(std::iter::repeat_n(' ', padding));
    dict.push('\n');
    let header_len = u16::try_from(dict.len()).map_err(|_| Error::Format("header too long".into()))?;

    writer.write_all(MAGIC)?;
    writer.write_all(&[1, 0])?;
    writer.write_all(&header_len.to_le_bytes())?;
    writer.write_all(dict.as_bytes())?;
    let mut bytes = Vec::with_capacity(h * w * 8);
    for v in array.as_standard_layout().iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    writer.write_all(&bytes)?;
    Ok(())
}

struct Header {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

fn dict_value<'a>(dict: &'a str, key: &str) -> Result<&'a str> {
    let needle = format!("'{key}':");
    let start = dict
        .find(&needle)
        .map(|i| i + needle.len())
        .ok_or_else(|| Error::Format(format!("npy header lacks '{key}'")))?;
    Ok(dict[start..].trim_start())
}

fn parse_header(dict: &str) -> Result<Header> {
    let dict = dict.trim();
    if !dict.starts_with('{') || !dict.ends_with('}') {
        return format_err("npy header is not a dictionary");
    }

    let descr = dict_value(dict, "descr")?;
    let descr = descr
        .strip_prefix('\'')
        .and_then(|d| d.split_once('\''))
        .map(|(d, _)| d.to_string())
        .ok_or_else(|| Error::Format("malformed 'descr'".into()))?;

    let fortran = dict_value(dict, "fortran_order")?;
    let fortran_order = if fortran.starts_with("False") {
        false
    } else if fortran.starts_with("True") {
        true
    } else {
        return format_err("malformed 'fortran_order'");
    };

    let shape = dict_value(dict, "shape")?;
    let inner = shape
        .strip_prefix('(')
        .and_then(|s| s.split_once(')'))
        .map(|(s, _)| s)
        .ok_or_else(|| Error::Format("malformed 'shape'".into()))?;
    let shape = inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| Error::Format(format!("bad dimension {s:?}"))))
        .collect::<Result<Vec<_>>>()?;

    Ok(Header {
        descr,
        fortran_order,
        shape,
    })
}

pub fn read_npy<R: Read>(reader: &mut R) -> Result<Field> {
    let mut preamble = [0u8; 10];
    reader.read_exact(&mut preamble)?;
    if &preamble[..6] != MAGIC {
        return format_err("not an npy file (bad magic)");
    }
    if preamble[6..8] != [1, 0] {
        return format_err(format!(
            "unsupported npy version {}.{} (only 1.0)",
            preamble[6], preamble[7]
        ));
    }
    let header_len = u16::from_le_bytes([preamble[8], preamble[9]]) as usize;
    let mut dict = vec![0u8; header_len];
    reader.read_exact(&mut dict)?;
    let dict = String::from_utf8(dict).map_err(|_| Error::Format("npy header is not ASCII".into()))?;
    let header = parse_header(&dict)?;

    if header.descr != "<f8" {
        return format_err(format!("unsupported dtype {:?} (only little-endian float64 '<f8')", header.descr));
    }
    if header.fortran_order {
        return format_err("Fortran-order arrays are not supported");
    }
    let [h, w] = header.shape[..] else {
        return format_err(format!("expected a 2D array, got {} dimensions", header.shape.len()));
    };

    let count = h
        .checked_mul(w)
        .ok_or_else(|| Error::Format("array too large".into()))?;
    let mut bytes = Vec::with_capacity(count * 8);
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return format_err(format!(
            "npy data holds {} bytes, expected {} for shape ({h}, {w})",
            bytes.len(),
            count * 8
        ));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Array2::from_shape_vec((h, w), values).expect("length checked"))
}

pub fn read_npy_file(path: impl AsRef<Path>) -> Result<Field> {
    let mut reader = BufReader::new(File::open(path)?);
    read_npy(&mut reader)
}

pub fn write_npy_file(path: impl AsRef<Path>, array: &Field) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_npy(&mut writer, array)?;
    writer.flush()?;
    Ok(())
}
