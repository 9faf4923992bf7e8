//! Binary image and coil files, dataset directories and PGM masks.
//!
//! ```text
//! image: b"img1", u32 LE ny nz nt,    then ny*nz*nt complex values
//! coils: b"coi1", u32 LE ny nz nt nc, then nc*ny*nz complex values
//! ```
//!
//! Complex values are stored as two little-endian `f64`, real part first.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kspace::{CoilMap, DataItem, GridShape, ImageStack, SamplingPattern};

const IMAGE_MAGIC: &[u8; 4] = b"img1";
const COIL_MAGIC: &[u8; 4] = b"coi1";

fn push_complex(out: &mut Vec<u8>, values: &[Complex64]) {
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
}

fn read_header(bytes: &[u8], magic: &[u8; 4], words: usize, what: &str) -> Result<Vec<usize>> {
    if bytes.len() < 4 + 4 * words || &bytes[..4] != magic {
        return Err(Error::Format(format!("not a {what} file")));
    }
    Ok((0..words)
        .map(|i| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize)
        .collect())
}

fn read_complex(payload: &[u8], count: usize, what: &str) -> Result<Vec<Complex64>> {
    if payload.len() != 16 * count {
        return Err(Error::Format(format!(
            "{what} payload has {} bytes, expected {}",
            payload.len(),
            16 * count
        )));
    }
    Ok(payload
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect())
}

pub fn image_to_bytes(x: &ImageStack) -> Vec<u8> {
    let s = x.shape();
    let mut out = Vec::with_capacity(16 + 16 * x.data().len());
    out.extend_from_slice(IMAGE_MAGIC);
    for v in [s.ny, s.nz, s.nt] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    push_complex(&mut out, x.data());
    out
}

/// Images carry no coil count; the returned shape has `nc = 1`.
pub fn image_from_bytes(bytes: &[u8]) -> Result<ImageStack> {
    let h = read_header(bytes, IMAGE_MAGIC, 3, "image")?;
    let shape = GridShape::new(h[0], h[1], h[2], 1)?;
    ImageStack::from_vec(shape, read_complex(&bytes[16..], shape.cells(), "image")?)
}

pub fn coils_to_bytes(c: &CoilMap) -> Vec<u8> {
    let s = c.shape();
    let mut out = Vec::with_capacity(20 + 16 * c.data().len());
    out.extend_from_slice(COIL_MAGIC);
    for v in [s.ny, s.nz, s.nt, s.nc] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    push_complex(&mut out, c.data());
    out
}

pub fn coils_from_bytes(bytes: &[u8]) -> Result<CoilMap> {
    let h = read_header(bytes, COIL_MAGIC, 4, "coil")?;
    let shape = GridShape::new(h[0], h[1], h[2], h[3])?;
    CoilMap::new(shape, read_complex(&bytes[20..], shape.nc * shape.frame_len(), "coil")?)
}

pub fn write_image(x: &ImageStack, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, image_to_bytes(x))?;
    Ok(())
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ImageStack> {
    image_from_bytes(&fs::read(path)?)
}

fn item_stem(i: usize) -> String {
    format!("item_{i:04}")
}

/// Writes `item_NNNN.img` and `item_NNNN.coil` for every item.
pub fn write_dataset(items: &[DataItem], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for (i, item) in items.iter().enumerate() {
        let stem = item_stem(i);
        fs::write(dir.join(format!("{stem}.img")), image_to_bytes(&item.image))?;
        fs::write(dir.join(format!("{stem}.coil")), coils_to_bytes(&item.coils))?;
    }
    Ok(())
}

/// `*.img` files of a directory in name order.
pub fn image_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "img"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Vec<DataItem>> {
    let files = image_files(&dir)?;
    if files.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut items = Vec::with_capacity(files.len());
    for path in files {
        let coils = coils_from_bytes(&fs::read(path.with_extension("coil"))?)?;
        let image = image_from_bytes(&fs::read(&path)?)?;
        if !image.shape().same_image_grid(&coils.shape()) {
            return Err(Error::shape(format!("{} does not match its coil file", path.display())));
        }
        let image = ImageStack::from_vec(coils.shape(), image.into_vec())?;
        items.push(DataItem::new(image, coils)?);
    }
    Ok(items)
}

/// Binary PGM with frames stacked vertically: 0 unsampled, 255 sampled,
/// 128 calibration.
pub fn mask_pgm(sp: &SamplingPattern) -> Vec<u8> {
    let (ny, nz, nt) = sp.grid();
    let mut out = format!("P5\n{nz} {}\n255\n", ny * nt).into_bytes();
    for (&m, &c) in sp.mask().iter().zip(sp.calibration_mask()) {
        out.push(match (m, c) {
            (_, true) => 128,
            (true, false) => 255,
            (false, false) => 0,
        });
    }
    out
}

pub fn write_mask_pgm(sp: &SamplingPattern, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, mask_pgm(sp))?;
    Ok(())
}
