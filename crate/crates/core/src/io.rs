//! Raster decoding and encoding (PNG, PGM/PPM) and mask palettes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use image::{ColorType, DynamicImage, ImageFormat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{GrayImage, LabelMask, RgbImage};

/// What to do when an RGB load meets a single-channel raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GrayPolicy {
    /// Replicate the gray channel into R, G and B.
    #[default]
    Promote,
    /// Fail with [`Error::ChannelCount`].
    Reject,
}

fn open(path: &Path) -> Result<DynamicImage> {
    let reader = image::ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let reader = reader.with_guessed_format().map_err(|e| Error::io(path, e))?;
    reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn check_depth(path: &Path, color: ColorType) -> Result<()> {
    match color {
        ColorType::L8 | ColorType::Rgb8 => Ok(()),
        ColorType::La8 | ColorType::Rgba8 => Err(Error::ChannelCount {
            channels: color.channel_count(),
        }),
        other => Err(Error::Decode {
            path: path.to_path_buf(),
            message: format!("unsupported pixel format {other:?}; only 8-bit gray/RGB"),
        }),
    }
}

/// Loads an 8-bit RGB raster (PNG or PPM).
pub fn load_rgb(path: impl AsRef<Path>, gray: GrayPolicy) -> Result<RgbImage> {
    let path = path.as_ref();
    let img = open(path)?;
    check_depth(path, img.color())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageRgb8(buf) => RgbImage::new(
            w,
            h,
            buf.pixels().map(|p| p.0).collect(),
        ),
        DynamicImage::ImageLuma8(buf) => match gray {
            GrayPolicy::Promote => RgbImage::from_gray_u8(w, h, buf.as_raw()),
            GrayPolicy::Reject => Err(Error::ChannelCount { channels: 1 }),
        },
        _ => unreachable!("checked by check_depth"),
    }
}

/// Loads any supported raster straight to grayscale.
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    Ok(load_rgb(path, GrayPolicy::Promote)?.to_gray())
}

fn format_for(path: &Path) -> Result<ImageFormat> {
    ImageFormat::from_path(path).map_err(|e| Error::Encode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn save(path: &Path, bytes: &[u8], w: usize, h: usize, color: image::ExtendedColorType) -> Result<()> {
    let format = format_for(path)?;
    image::save_buffer_with_format(path, bytes, w as u32, h as u32, color, format).map_err(|e| {
        match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Encode {
                path: path.to_path_buf(),
                message: other.to_string(),
            },
        }
    })
}

/// Writes a grayscale image, rounding and clamping to 8 bits.
pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    save(
        path.as_ref(),
        &img.to_u8(),
        img.width(),
        img.height(),
        image::ExtendedColorType::L8,
    )
}

/// A raster pixel value as it appears in a mask file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PixelKey {
    Gray(u8),
    Rgb([u8; 3]),
}

impl fmt::Display for PixelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PixelKey::Gray(v) => write!(f, "{v}"),
            PixelKey::Rgb([r, g, b]) => write!(f, "#{r:02x}{g:02x}{b:02x}"),
        }
    }
}

impl FromStr for PixelKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(hex) = s.strip_prefix('#') {
            if hex.len() != 6 {
                return Err(Error::Palette(format!("bad color {s:?}")));
            }
            let mut rgb = [0u8; 3];
            for (i, c) in rgb.iter_mut().enumerate() {
                *c = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                    .map_err(|_| Error::Palette(format!("bad color {s:?}")))?;
            }
            Ok(PixelKey::Rgb(rgb))
        } else {
            s.parse::<u8>()
                .map(PixelKey::Gray)
                .map_err(|_| Error::Palette(format!("bad gray value {s:?}")))
        }
    }
}

/// Explicit mapping from raster values to class labels.
///
/// Text form: comma-separated `key=class` entries where `key` is a gray
/// level (`255`) or a hex color (`#0000ff`). Several keys may map to the
/// same class. Class names are attached separately.
///
/// ```text
/// 0=0,255=1
/// #000000=0,#0000ff=1,#ff0000=2,#00ff00=0
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Palette {
    entries: BTreeMap<PixelKey, u8>,
}

impl Palette {
    pub fn new(entries: impl IntoIterator<Item = (PixelKey, u8)>) -> Result<Self> {
        let entries: BTreeMap<_, _> = entries.into_iter().collect();
        if entries.is_empty() {
            return Err(Error::Palette("palette is empty".into()));
        }
        let pal = Self { entries };
        // Classes must be contiguous 0..K.
        let k = pal.num_classes();
        for class in 0..k {
            if !pal.entries.values().any(|&c| usize::from(c) == class) {
                return Err(Error::Palette(format!("class {class} has no palette entry")));
            }
        }
        Ok(pal)
    }

    /// `0=0,255=1`.
    pub fn binary() -> Self {
        Self::new([(PixelKey::Gray(0), 0), (PixelKey::Gray(255), 1)]).expect("valid")
    }

    pub fn num_classes(&self) -> usize {
        self.entries.values().map(|&c| usize::from(c) + 1).max().unwrap_or(0)
    }

    fn lookup_gray(&self, v: u8) -> Option<u8> {
        self.entries
            .get(&PixelKey::Gray(v))
            .or_else(|| self.entries.get(&PixelKey::Rgb([v, v, v])))
            .copied()
    }

    fn lookup_rgb(&self, p: [u8; 3]) -> Option<u8> {
        self.entries.get(&PixelKey::Rgb(p)).copied().or_else(|| {
            (p[0] == p[1] && p[1] == p[2])
                .then(|| self.entries.get(&PixelKey::Gray(p[0])).copied())
                .flatten()
        })
    }

    /// First key (in key order) for each class; used when writing masks.
    pub fn representative(&self, class: u8) -> Option<PixelKey> {
        self.entries
            .iter()
            .find(|(_, &c)| c == class)
            .map(|(k, _)| *k)
    }

    fn all_gray(&self) -> bool {
        (0..self.num_classes() as u8)
            .all(|c| matches!(self.representative(c), Some(PixelKey::Gray(_))))
    }
}

impl FromStr for Palette {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let entries = s
            .split(',')
            .filter(|e| !e.trim().is_empty())
            .map(|entry| {
                let (key, class) = entry
                    .split_once('=')
                    .ok_or_else(|| Error::Palette(format!("entry {entry:?} lacks '='")))?;
                let class = class
                    .trim()
                    .parse::<u8>()
                    .map_err(|_| Error::Palette(format!("bad class in {entry:?}")))?;
                Ok((key.parse::<PixelKey>()?, class))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }
}

impl fmt::Display for Palette {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, c)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}={c}")?;
        }
        Ok(())
    }
}

impl TryFrom<String> for Palette {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Palette> for String {
    fn from(p: Palette) -> String {
        p.to_string()
    }
}

/// Decodes a mask raster through an explicit palette.
pub fn load_mask(path: impl AsRef<Path>, palette: &Palette) -> Result<LabelMask> {
    let path = path.as_ref();
    let img = open(path)?;
    check_depth(path, img.color())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let labels = match &img {
        DynamicImage::ImageLuma8(buf) => buf
            .as_raw()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                palette.lookup_gray(v).ok_or(Error::UnmappedValue {
                    value: PixelKey::Gray(v).to_string(),
                    x: i % w,
                    y: i / w,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        DynamicImage::ImageRgb8(buf) => buf
            .pixels()
            .enumerate()
            .map(|(i, p)| {
                palette.lookup_rgb(p.0).ok_or(Error::UnmappedValue {
                    value: PixelKey::Rgb(p.0).to_string(),
                    x: i % w,
                    y: i / w,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        _ => unreachable!("checked by check_depth"),
    };
    LabelMask::new(w, h, palette.num_classes(), labels)
}

/// Writes a mask using each class's representative palette value. Gray-only
/// palettes produce a single-channel raster, otherwise RGB.
pub fn save_mask(mask: &LabelMask, palette: &Palette, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if palette.num_classes() < mask.num_classes() {
        return Err(Error::Palette(format!(
            "palette covers {} classes, mask has {}",
            palette.num_classes(),
            mask.num_classes()
        )));
    }
    let keys: Vec<PixelKey> = (0..mask.num_classes() as u8)
        .map(|c| palette.representative(c).expect("contiguous classes"))
        .collect();
    if palette.all_gray() {
        let bytes: Vec<u8> = mask
            .labels()
            .iter()
            .map(|&l| match keys[usize::from(l)] {
                PixelKey::Gray(v) => v,
                PixelKey::Rgb(_) => unreachable!(),
            })
            .collect();
        save(path, &bytes, mask.width(), mask.height(), image::ExtendedColorType::L8)
    } else {
        let bytes: Vec<u8> = mask
            .labels()
            .iter()
            .flat_map(|&l| match keys[usize::from(l)] {
                PixelKey::Gray(v) => [v, v, v],
                PixelKey::Rgb(p) => p,
            })
            .collect();
        save(path, &bytes, mask.width(), mask.height(), image::ExtendedColorType::Rgb8)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_parse_and_display() {
        let p: Palette = "0=0, 255=1".parse().unwrap();
        assert_eq!(p.num_classes(), 2);
        assert_eq!(p.to_string(), "0=0,255=1");

        let lunar: Palette = "#000000=0,#0000ff=1,#ff0000=2,#00ff00=0".parse().unwrap();
        assert_eq!(lunar.num_classes(), 3);
        assert_eq!(lunar.representative(0), Some(PixelKey::Rgb([0, 0, 0])));

        assert!("0=0,255=2".parse::<Palette>().is_err());
        assert!("#12=0".parse::<Palette>().is_err());
        assert!("".parse::<Palette>().is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_rgb("/definitely/not/here.png", GrayPolicy::Promote).unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err}");
    }
}
