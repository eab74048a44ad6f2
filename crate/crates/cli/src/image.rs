//! RGB float images: PFM for the data, PNG for a quick look.
//!
//! Row 0 is the top of the image in memory. PFM stores rows bottom to top,
//! so the writer and reader flip; a write/read cycle is bit exact.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB, row-major from the top.
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, v: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&v);
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len().max(1) as f64
    }

    pub fn write_pfm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "PF\n{} {}\n-1.0\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for y in (0..self.height).rev() {
            let row = &self.data[y * self.width * 3..(y + 1) * self.width * 3];
            for v in row {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)
    }

    pub fn read_pfm<Rd: Read>(r: Rd) -> CliResult<Self> {
        let bad = |m: &str| CliError::Usage(format!("not a PFM image: {m}"));
        let mut r = BufReader::new(r);
        let mut header = String::new();
        let mut line = |r: &mut BufReader<Rd>| -> CliResult<String> {
            header.clear();
            r.read_line(&mut header).map_err(|e| CliError::io("reading PFM header", e))?;
            Ok(header.trim().to_string())
        };
        if line(&mut r)? != "PF" {
            return Err(bad("expected colour PF header"));
        }
        let dims = line(&mut r)?;
        let mut it = dims.split_whitespace().map(|s| s.parse::<usize>());
        let (width, height) = match (it.next(), it.next(), it.next()) {
            (Some(Ok(w)), Some(Ok(h)), None) => (w, h),
            _ => return Err(bad("bad dimensions")),
        };
        let scale: f32 = line(&mut r)?.parse().map_err(|_| bad("bad scale"))?;
        if scale >= 0.0 {
            return Err(bad("only little-endian files are supported"));
        }
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| CliError::io("reading PFM data", e))?;
        if bytes.len() != width * height * 12 {
            return Err(bad("payload length does not match dimensions"));
        }
        let mut img = Image::new(width, height);
        for (k, chunk) in bytes.chunks_exact(4).enumerate() {
            let (y, rest) = (height - 1 - k / (width * 3), k % (width * 3));
            img.data[y * width * 3 + rest] = f32::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(img)
    }

    /// 8-bit preview with `x / (1 + x)` and gamma 2.2.
    pub fn write_png<W: Write>(&self, w: W) -> CliResult<()> {
        let mut enc = png::Encoder::new(w, self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let pixels: Vec<u8> = self.data.iter().map(|&v| tonemap(v)).collect();
        let mut writer = enc
            .write_header()
            .map_err(|e| CliError::io("writing PNG", std::io::Error::other(e)))?;
        writer
            .write_image_data(&pixels)
            .map_err(|e| CliError::io("writing PNG", std::io::Error::other(e)))
    }

    /// Writes `path` as PFM and a PNG preview next to it.
    pub fn save(&self, path: &Path) -> CliResult<()> {
        let f = std::fs::File::create(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
        self.write_pfm(std::io::BufWriter::new(f))
            .map_err(|e| CliError::io(path.display().to_string(), e))?;
        let preview = path.with_extension("png");
        let f = std::fs::File::create(&preview)
            .map_err(|e| CliError::io(preview.display().to_string(), e))?;
        self.write_png(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let f = std::fs::File::open(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
        Self::read_pfm(f)
    }
}

fn tonemap(v: f32) -> u8 {
    if v == f32::INFINITY {
        return 255;
    }
    let v = v.max(0.0) as f64;
    let t = (v / (1.0 + v)).powf(1.0 / 2.2);
    (t * 255.0 + 0.5).clamp(0.0, 255.0) as u8
}
