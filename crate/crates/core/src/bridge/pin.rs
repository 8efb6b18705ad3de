//! Pin overlay: a filled disc with a contrasting ring and the comment's
//! batch index, composited onto the frame image at the comment coordinate.

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ImageEncoder, Rgba, RgbaImage};

pub const PIN_RADIUS: i64 = 12;
pub const PIN_BORDER: i64 = 2;
pub const PIN_FILL: Rgba<u8> = Rgba([220, 38, 38, 255]);
pub const PIN_RING: Rgba<u8> = Rgba([255, 255, 255, 255]);
pub const PIN_TEXT: Rgba<u8> = Rgba([255, 255, 255, 255]);

/// 3x5 digit glyphs, one row per byte, high bit = left column.
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b011, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b010, 0b010, 0b010],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

/// The numeral sits in the upper half of the disc, rows `cy-7..=cy-3`, so
/// the centre pixel always shows the fill colour.
const TEXT_TOP: i64 = -7;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedPinImage {
    pub pixels: RgbaImage,
    pub pin_center: (u32, u32),
    pub clamped: bool,
    pub index: u32,
}

impl RenderedPinImage {
    /// 8-bit RGBA PNG with fixed encoder settings.
    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        PngEncoder::new_with_quality(&mut out, CompressionType::Default, FilterType::Adaptive)
            .write_image(
                self.pixels.as_raw(),
                self.pixels.width(),
                self.pixels.height(),
                image::ExtendedColorType::Rgba8,
            )
            .expect("encoding to memory cannot fail");
        out
    }
}

fn clamp_axis(v: f64, len: u32) -> (u32, bool) {
    let max = len - 1;
    if v.is_nan() {
        (0, true)
    } else if v < 0.0 {
        (0, true)
    } else if v >= len as f64 {
        (max, true)
    } else {
        (v.floor() as u32, false)
    }
}

/// Clamped integer pin position and whether clamping happened.
pub fn clamp_point(width: u32, height: u32, x: f64, y: f64) -> ((u32, u32), bool) {
    let (cx, a) = clamp_axis(x, width);
    let (cy, b) = clamp_axis(y, height);
    ((cx, cy), a || b)
}

fn put(img: &mut RgbaImage, x: i64, y: i64, color: Rgba<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

/// Renders the pin. Panics if the frame is empty; callers validate frames
/// on fetch.
pub fn render_pin(frame: &RgbaImage, x: f64, y: f64, index: u32) -> RenderedPinImage {
    assert!(frame.width() >= 1 && frame.height() >= 1, "frame must be at least 1x1");
    let ((cx, cy), clamped) = clamp_point(frame.width(), frame.height(), x, y);
    let mut img = frame.clone();
    let (cxi, cyi) = (cx as i64, cy as i64);

    let outer = PIN_RADIUS * PIN_RADIUS;
    let inner = (PIN_RADIUS - PIN_BORDER) * (PIN_RADIUS - PIN_BORDER);
    for dy in -PIN_RADIUS..=PIN_RADIUS {
        for dx in -PIN_RADIUS..=PIN_RADIUS {
            let d2 = dx * dx + dy * dy;
            if d2 <= inner {
                put(&mut img, cxi + dx, cyi + dy, PIN_FILL);
            } else if d2 <= outer {
                put(&mut img, cxi + dx, cyi + dy, PIN_RING);
            }
        }
    }

    let digits: Vec<usize> = index
        .to_string()
        .bytes()
        .map(|b| (b - b'0') as usize)
        .collect();
    let text_w = digits.len() as i64 * 4 - 1;
    let left = cxi - text_w / 2;
    for (i, d) in digits.iter().enumerate() {
        for (row, bits) in DIGITS[*d].iter().enumerate() {
            for col in 0..3 {
                if bits & (0b100 >> col) == 0 {
                    continue;
                }
                let dx = left + i as i64 * 4 + col - cxi;
                let dy = TEXT_TOP + row as i64;
                // digits that would spill past the fill are clipped
                if dx * dx + dy * dy <= inner {
                    put(&mut img, cxi + dx, cyi + dy, PIN_TEXT);
                }
            }
        }
    }

    RenderedPinImage {
        pixels: img,
        pin_center: (cx, cy),
        clamped,
        index,
    }
}
