//! Synthetic printed pages from an embedded 5x7 bitmap font: training
//! sheets laid out as a letter grid, running-text test pages, and
//! salt-and-pepper / jitter degradation.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::segmentation::{GridConfig, Orientation};

pub const GLYPH_W: u32 = 5;
pub const GLYPH_H: u32 = 7;

const PAPER: u8 = 255;
const INK: u8 = 0;

// Rows top to bottom, bit 4 is the leftmost column.
const GLYPHS: [[u8; 7]; 26] = [
    [0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001], // A
    [0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110], // B
    [0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110], // C
    [0b11100, 0b10010, 0b10001, 0b10001, 0b10001, 0b10010, 0b11100], // D
    [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111], // E
    [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000], // F
    [0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111], // G
    [0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001], // H
    [0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110], // I
    [0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100], // J
    [0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001], // K
    [0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111], // L
    [0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001], // M
    [0b10001, 0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001], // N
    [0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110], // O
    [0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000], // P
    [0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101], // Q
    [0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001], // R
    [0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110], // S
    [0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100], // T
    [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110], // U
    [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100], // V
    [0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010], // W
    [0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001], // X
    [0b10001, 0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100], // Y
    [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111], // Z
];

/// Row bitmaps of an uppercase letter, if the font has it.
pub fn glyph(c: char) -> Option<[u8; 7]> {
    c.is_ascii_uppercase().then(|| GLYPHS[(c as u8 - b'A') as usize])
}

/// A 61-word uppercase passage used as the printed test page.
pub const SAMPLE_TEXT: &str = "OPTICAL CHARACTER RECOGNITION TURNS SCANNED PAGES INTO EDITABLE TEXT \
THE SYSTEM FINDS EACH LETTER AS A SMALL BLOB THEN RESIZES IT TO A FIXED GRID AND FEEDS \
THE PIXEL AVERAGES TO A TRAINED MODEL WHICH NAMES THE LETTER THE RECOGNIZED WORDS ARE \
COMPARED WITH THE ORIGINAL TEXT TO MEASURE HOW MANY CHARACTERS AND WORDS MATCH BEFORE \
THE ABSTRACT IS THEN CLASSIFIED";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderStyle {
    /// Pixels per font dot.
    pub scale: u32,
    /// Maximum per-glyph offset in pixels, drawn uniformly from `-jitter..=jitter`.
    pub jitter: u32,
    /// Salt-and-pepper probability per pixel.
    pub noise: f64,
    pub seed: u64,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            scale: 4,
            jitter: 0,
            noise: 0.0,
            seed: 0,
        }
    }
}

impl RenderStyle {
    fn margin(&self) -> u32 {
        5 * self.scale + self.jitter
    }
}

fn draw_glyph(img: &mut GrayImage, c: char, x: i64, y: i64, scale: u32) -> Result<()> {
    let rows = glyph(c).ok_or_else(|| Error::InvalidArgument(format!("no glyph for {c:?}")))?;
    for (gy, bits) in rows.iter().enumerate() {
        for gx in 0..GLYPH_W {
            if bits >> (GLYPH_W - 1 - gx) & 1 == 0 {
                continue;
            }
            for dy in 0..scale as i64 {
                for dx in 0..scale as i64 {
                    let px = x + gx as i64 * scale as i64 + dx;
                    let py = y + gy as i64 * scale as i64 + dy;
                    if px >= 0 && py >= 0 && px < img.width() as i64 && py < img.height() as i64 {
                        img.set(px as u32, py as u32, INK);
                    }
                }
            }
        }
    }
    Ok(())
}

fn offset(rng: &mut ChaCha8Rng, jitter: u32) -> i64 {
    if jitter == 0 {
        0
    } else {
        rng.random_range(-(jitter as i64)..=jitter as i64)
    }
}

/// Replaces each pixel, with probability `p`, by black or white (equally likely).
pub fn add_salt_pepper(img: &mut GrayImage, p: f64, rng: &mut impl Rng) {
    if p <= 0.0 {
        return;
    }
    for y in 0..img.height() {
        for x in 0..img.width() {
            if rng.random_bool(p) {
                img.set(x, y, if rng.random_bool(0.5) { INK } else { PAPER });
            }
        }
    }
}

/// A training sheet: one grid band per letter, `n_samples` copies each.
pub fn render_training_sheet(cfg: &GridConfig, style: &RenderStyle) -> Result<GrayImage> {
    cfg.validate()?;
    let s = style.scale;
    let pitch_x = (GLYPH_W + 4) * s;
    let pitch_y = (GLYPH_H + 4) * s;
    let (cols, rows) = match cfg.orientation {
        Orientation::LettersAlongColumns => (cfg.n_letters, cfg.n_samples),
        Orientation::LettersAlongRows => (cfg.n_samples, cfg.n_letters),
    };
    let margin = style.margin();
    let width = 2 * margin + cols as u32 * pitch_x;
    let height = 2 * margin + rows as u32 * pitch_y;
    let mut img = GrayImage::filled(width, height, PAPER);
    let mut rng = ChaCha8Rng::seed_from_u64(style.seed);
    let alphabet: Vec<char> = cfg.alphabet.chars().collect();
    for r in 0..rows {
        for c in 0..cols {
            let letter = match cfg.orientation {
                Orientation::LettersAlongColumns => alphabet[c],
                Orientation::LettersAlongRows => alphabet[r],
            };
            let x = (margin + c as u32 * pitch_x + 2 * s) as i64 + offset(&mut rng, style.jitter);
            let y = (margin + r as u32 * pitch_y + 2 * s) as i64 + offset(&mut rng, style.jitter);
            draw_glyph(&mut img, letter, x, y, s)?;
        }
    }
    add_salt_pepper(&mut img, style.noise, &mut rng);
    Ok(img)
}

/// Greedy word wrap at `max_chars` characters per line.
pub fn wrap_words(text: &str, max_chars: usize) -> Vec<String> {
    let mut lines: Vec<String> = Vec::new();
    let mut current = String::new();
    for word in text.split_whitespace() {
        if !current.is_empty() && current.len() + 1 + word.len() > max_chars {
            lines.push(std::mem::take(&mut current));
        }
        if !current.is_empty() {
            current.push(' ');
        }
        current.push_str(word);
    }
    if !current.is_empty() {
        lines.push(current);
    }
    lines
}

/// Renders lines of uppercase text with one dot of spacing between letters
/// and a full cell for each space.
pub fn render_text_page(lines: &[String], style: &RenderStyle) -> Result<GrayImage> {
    let s = style.scale;
    let advance = (GLYPH_W + 1) * s;
    let pitch_y = (GLYPH_H + 4) * s;
    let longest = lines.iter().map(|l| l.chars().count()).max().unwrap_or(0) as u32;
    let margin = style.margin();
    let width = 2 * margin + longest.max(1) * advance;
    let height = 2 * margin + lines.len().max(1) as u32 * pitch_y;
    let mut img = GrayImage::filled(width, height, PAPER);
    let mut rng = ChaCha8Rng::seed_from_u64(style.seed);
    for (row, line) in lines.iter().enumerate() {
        for (col, c) in line.chars().enumerate() {
            if c == ' ' {
                continue;
            }
            let x = (margin + col as u32 * advance) as i64 + offset(&mut rng, style.jitter);
            let y = (margin + row as u32 * pitch_y) as i64 + offset(&mut rng, style.jitter);
            draw_glyph(&mut img, c, x, y, s)?;
        }
    }
    add_salt_pepper(&mut img, style.noise, &mut rng);
    Ok(img)
}

pub fn write_png(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf = image::GrayImage::from_raw(img.width(), img.height(), img.pixels().to_vec())
        .expect("buffer matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::InvalidArgument(other.to_string()),
        })
}
