//! Decoding and encoding of the image formats the pipeline accepts.
//!
//! Binary PGM (P5) and PPM (P6) are parsed by hand so the byte layout stays
//! fully pinned: the canonical PGM header written here is
//! `"P5\n<w> <h>\n255\n"` followed by raw pixels, and golden tests rely on
//! that exact form. PNG goes through the `image` crate; only 8-bit
//! grayscale and RGB without alpha are accepted, 16-bit sources are
//! rejected rather than narrowed.

use image::codecs::png::PngEncoder;
use image::{ColorType, DynamicImage, ExtendedColorType, ImageEncoder};
use thiserror::Error;

use crate::raster::{Raster, RgbRaster};

/// Formats understood by [`decode_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Ppm,
    Png,
}

/// Formats produced by [`encode_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodeFormat {
    Pgm,
    Png,
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated pixel data: expected {expected} bytes, found {got}")]
    TruncatedData { expected: usize, got: usize },
    #[error("unsupported bit depth: {0}")]
    UnsupportedBitDepth(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("png: {0}")]
    Png(#[from] image::ImageError),
}

/// A decoded image, grayscale or color.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodedImage {
    Gray(Raster),
    Rgb(RgbRaster),
}

impl DecodedImage {
    pub fn width(&self) -> usize {
        match self {
            DecodedImage::Gray(r) => r.width(),
            DecodedImage::Rgb(r) => r.width(),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            DecodedImage::Gray(r) => r.height(),
            DecodedImage::Rgb(r) => r.height(),
        }
    }

    /// Grayscale view: pass-through for gray images, Rec.601 luma for color.
    pub fn into_luma(self) -> Raster {
        match self {
            DecodedImage::Gray(r) => r,
            DecodedImage::Rgb(r) => crate::raster::to_luma(&r),
        }
    }
}

/// Decodes a PGM, PPM, or PNG byte stream.
///
/// Without a hint the format is sniffed from the magic bytes.
pub fn decode_image(bytes: &[u8], hint: Option<ImageFormat>) -> Result<DecodedImage, CodecError> {
    let format = match hint {
        Some(f) => f,
        None => sniff_format(bytes)?,
    };
    match format {
        ImageFormat::Pgm => decode_pnm(bytes, b'5'),
        ImageFormat::Ppm => decode_pnm(bytes, b'6'),
        ImageFormat::Png => decode_png(bytes),
    }
}

/// Encodes a grayscale raster as canonical PGM or as an 8-bit gray PNG.
pub fn encode_image(raster: &Raster, format: EncodeFormat) -> Result<Vec<u8>, CodecError> {
    match format {
        EncodeFormat::Pgm => Ok(encode_pgm(raster)),
        EncodeFormat::Png => encode_png(raster),
    }
}

fn sniff_format(bytes: &[u8]) -> Result<ImageFormat, CodecError> {
    const PNG_MAGIC: &[u8] = &[0x89, b'P', b'N', b'G'];
    if bytes.starts_with(b"P5") {
        Ok(ImageFormat::Pgm)
    } else if bytes.starts_with(b"P6") {
        Ok(ImageFormat::Ppm)
    } else if bytes.starts_with(PNG_MAGIC) {
        Ok(ImageFormat::Png)
    } else {
        Err(CodecError::UnsupportedFormat(
            "unrecognized magic bytes (expected P5, P6, or PNG)".into(),
        ))
    }
}

// ---------------------------------------------------------------------------
// PNM (binary PGM / PPM)
// ---------------------------------------------------------------------------

struct PnmHeader {
    width: usize,
    height: usize,
    data_start: usize,
}

/// Parses "P<digit>", then width, height, maxval tokens separated by
/// whitespace (with `#` line comments), then the single whitespace byte
/// that precedes the raw pixel data.
fn parse_pnm_header(bytes: &[u8], digit: u8) -> Result<PnmHeader, CodecError> {
    if bytes.len() < 2 || bytes[0] != b'P' || bytes[1] != digit {
        return Err(CodecError::MalformedHeader(format!(
            "expected magic P{}",
            digit as char
        )));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        pos = skip_pnm_whitespace(bytes, pos)?;
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(CodecError::MalformedHeader(
                "expected decimal field in header".into(),
            ));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| CodecError::MalformedHeader(format!("field {text} out of range")))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(CodecError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval == 0 {
        return Err(CodecError::MalformedHeader("maxval 0".into()));
    }
    if maxval > 255 {
        return Err(CodecError::UnsupportedBitDepth(format!(
            "PNM maxval {maxval} exceeds 8-bit range"
        )));
    }
    // Exactly one whitespace byte separates the header from the raster data.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(CodecError::MalformedHeader(
            "missing whitespace before pixel data".into(),
        ));
    }
    Ok(PnmHeader {
        width,
        height,
        data_start: pos + 1,
    })
}

fn skip_pnm_whitespace(bytes: &[u8], mut pos: usize) -> Result<usize, CodecError> {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return Ok(pos);
        }
    }
}

fn decode_pnm(bytes: &[u8], digit: u8) -> Result<DecodedImage, CodecError> {
    let header = parse_pnm_header(bytes, digit)?;
    let channels = if digit == b'5' { 1 } else { 3 };
    let expected = header.width * header.height * channels;
    let data = &bytes[header.data_start.min(bytes.len())..];
    if data.len() < expected {
        return Err(CodecError::TruncatedData {
            expected,
            got: data.len(),
        });
    }
    let data = &data[..expected];
    if digit == b'5' {
        let raster = Raster::from_pixels(header.width, header.height, data.to_vec())
            .expect("length checked");
        Ok(DecodedImage::Gray(raster))
    } else {
        let pixels = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let raster =
            RgbRaster::from_pixels(header.width, header.height, pixels).expect("length checked");
        Ok(DecodedImage::Rgb(raster))
    }
}

fn encode_pgm(raster: &Raster) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", raster.width(), raster.height());
    let mut out = header.into_bytes();
    out.extend_from_slice(raster.pixels());
    out
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

fn decode_png(bytes: &[u8]) -> Result<DecodedImage, CodecError> {
    let dynamic = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
    match dynamic {
        DynamicImage::ImageLuma8(img) => {
            let (w, h) = (img.width() as usize, img.height() as usize);
            let raster =
                Raster::from_pixels(w, h, img.into_raw()).expect("buffer matches dimensions");
            Ok(DecodedImage::Gray(raster))
        }
        DynamicImage::ImageRgb8(img) => {
            let (w, h) = (img.width() as usize, img.height() as usize);
            let pixels = img
                .into_raw()
                .chunks_exact(3)
                .map(|c| [c[0], c[1], c[2]])
                .collect();
            let raster = RgbRaster::from_pixels(w, h, pixels).expect("buffer matches dimensions");
            Ok(DecodedImage::Rgb(raster))
        }
        other => match other.color() {
            ColorType::L16 | ColorType::La16 | ColorType::Rgb16 | ColorType::Rgba16 => Err(
                CodecError::UnsupportedBitDepth("16-bit PNG is not supported".into()),
            ),
            color => Err(CodecError::UnsupportedFormat(format!(
                "PNG color type {color:?} (only 8-bit grayscale and RGB)"
            ))),
        },
    }
}

fn encode_png(raster: &Raster) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(
        raster.pixels(),
        raster.width() as u32,
        raster.height() as u32,
        ExtendedColorType::L8,
    )?;
    Ok(out)
}
