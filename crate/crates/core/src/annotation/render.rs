//! Argument text rendered to PNG, so the text cannot be scraped from HTML.

use std::io::Cursor;

use font8x8::{UnicodeFonts, BASIC_FONTS};
use image::{ImageFormat, Luma};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    pub width: u32,
    /// Pixels per font pixel.
    pub scale: u32,
    pub margin: u32,
    pub line_gap: u32,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            width: 640,
            scale: 2,
            margin: 16,
            line_gap: 6,
        }
    }
}

fn ascii_fold(c: char) -> char {
    match c {
        '\u{2018}' | '\u{2019}' | '\u{201A}' => '\'',
        '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{00AB}' | '\u{00BB}' => '"',
        '\u{2013}' | '\u{2014}' | '\u{2212}' => '-',
        '\u{2026}' => '.',
        '\u{00A0}' | '\t' => ' ',
        c if c.is_ascii() && !c.is_ascii_control() => c,
        _ => '?',
    }
}

fn wrap(text: &str, cols: usize) -> Vec<String> {
    let mut lines = Vec::new();
    for paragraph in text.lines() {
        let mut line = String::new();
        for word in paragraph.split_whitespace() {
            let word: String = word.chars().map(ascii_fold).collect();
            let mut word = word.as_str();
            // hard-break words longer than a line
            while word.len() > cols {
                if !line.is_empty() {
                    lines.push(std::mem::take(&mut line));
                }
                lines.push(word[..cols].to_string());
                word = &word[cols..];
            }
            if !line.is_empty() && line.len() + 1 + word.len() > cols {
                lines.push(std::mem::take(&mut line));
            }
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(word);
        }
        lines.push(line);
    }
    if lines.is_empty() {
        lines.push(String::new());
    }
    lines
}

/// Greyscale PNG of `text`, word-wrapped to `options.width`.
pub fn render_argument_png(text: &str, options: &RenderOptions) -> Vec<u8> {
    let glyph = 8 * options.scale.max(1);
    let cols = ((options.width.saturating_sub(2 * options.margin)) / glyph).max(1) as usize;
    let lines = wrap(text, cols);
    let line_h = glyph + options.line_gap;
    let height = 2 * options.margin + lines.len() as u32 * line_h;
    let mut img = image::GrayImage::from_pixel(options.width, height, Luma([255]));
    for (row, line) in lines.iter().enumerate() {
        let y0 = options.margin + row as u32 * line_h;
        for (col, ch) in line.chars().enumerate() {
            let Some(bitmap) = BASIC_FONTS.get(ch) else { continue };
            let x0 = options.margin + col as u32 * glyph;
            for (gy, bits) in bitmap.iter().enumerate() {
                for gx in 0..8 {
                    if bits & (1 << gx) == 0 {
                        continue;
                    }
                    for dy in 0..options.scale {
                        for dx in 0..options.scale {
                            let x = x0 + gx * options.scale + dx;
                            let y = y0 + gy as u32 * options.scale + dy;
                            if x < options.width && y < height {
                                img.put_pixel(x, y, Luma([0]));
                            }
                        }
                    }
                }
            }
        }
    }
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .expect("encoding an in-memory PNG cannot fail");
    out.into_inner()
}
