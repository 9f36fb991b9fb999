use std::io::Write;

use super::RenderError;

/// Row-major image with interleaved channels. Silhouettes hold exactly 0 or
/// 1, shaded images values in `[0, 1]`, depth maps distances in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Image {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self, RenderError> {
        if data.len() != width * height * channels || !matches!(channels, 1 | 3) {
            return Err(RenderError::ImageSize {
                expected: (width, height, channels),
                actual: data.len(),
            });
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Number of non-zero samples in channel 0.
    pub fn coverage(&self) -> usize {
        self.data.iter().step_by(self.channels).filter(|&&v| v != 0.0).count()
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    fn same_dims(&self, other: &Image) -> Result<(), RenderError> {
        if (self.width, self.height, self.channels) != (other.width, other.height, other.channels) {
            return Err(RenderError::DimensionMismatch {
                a: (self.width, self.height, self.channels),
                b: (other.width, other.height, other.channels),
            });
        }
        Ok(())
    }

    /// Samples in planar `[channel][row][col]` order.
    pub fn to_planar(&self) -> Vec<f32> {
        let n = self.width * self.height;
        let mut out = vec![0.0; self.data.len()];
        for (i, px) in self.data.chunks_exact(self.channels).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                out[c * n + i] = v;
            }
        }
        out
    }

    /// Binary PGM (`P5`) for one channel or PPM (`P6`) for three, 8-bit,
    /// samples scaled by 255, rounded and clamped, rows top to bottom.
    pub fn to_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }

    pub fn write_pnm(&self, path: &std::path::Path) -> Result<(), RenderError> {
        let mut f = std::fs::File::create(path).map_err(|e| RenderError::Io(format!("{}: {e}", path.display())))?;
        f.write_all(&self.to_pnm()).map_err(|e| RenderError::Io(e.to_string()))
    }

    /// Parses 8-bit `P5` / `P6` data written by [`Image::to_pnm`] (or any
    /// tool using maxval ≤ 255 and single-whitespace header separators).
    pub fn from_pnm(bytes: &[u8]) -> Result<Image, RenderError> {
        let bad = |msg: &str| RenderError::Pnm(msg.to_string());
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?);
        }
        pos += 1;
        let channels = match fields[0] {
            "P5" => 1,
            "P6" => 3,
            other => return Err(RenderError::Pnm(format!("unsupported magic {other:?}"))),
        };
        let parse = |s: &str| s.parse::<usize>().map_err(|_| RenderError::Pnm(format!("bad header field {s:?}")));
        let (w, h, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(bad("only 8-bit maxval supported"));
        }
        let n = w * h * channels;
        let raw = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated pixel data"))?;
        let data = raw.iter().map(|&b| b as f32 / maxval as f32).collect();
        Image::from_data(w, h, channels, data)
    }
}

/// Mean squared per-sample difference between two images of equal shape.
pub fn mean_squared_difference(a: &Image, b: &Image) -> Result<f64, RenderError> {
    a.same_dims(b)?;
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.data.len() as f64)
}

/// Data energy between binary silhouettes: the fraction of disagreeing
/// pixels, i.e. the mean squared pixel difference.
pub fn silhouette_energy(sim: &Image, obs: &Image) -> Result<f64, RenderError> {
    sim.same_dims(obs)?;
    if !sim.is_binary() || !obs.is_binary() {
        return Err(RenderError::NotBinary);
    }
    mean_squared_difference(sim, obs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_examples() {
        let mut a = Image::new(4, 4, 1);
        a.set(1, 2, 0, 1.0);
        assert_eq!(silhouette_energy(&a, &a).unwrap(), 0.0);
        let comp = Image::from_data(4, 4, 1, a.data.iter().map(|v| 1.0 - v).collect()).unwrap();
        assert_eq!(silhouette_energy(&a, &comp).unwrap(), 1.0);
        let empty = Image::new(4, 4, 1);
        assert_eq!(silhouette_energy(&a, &empty).unwrap(), 1.0 / 16.0);
        assert!(silhouette_energy(&a, &Image::new(4, 5, 1)).is_err());
        let mut gray = Image::new(4, 4, 1);
        gray.set(0, 0, 0, 0.5);
        assert_eq!(silhouette_energy(&a, &gray), Err(RenderError::NotBinary));
    }

    #[test]
    fn pnm_round_trip() {
        let mut img = Image::new(9, 8, 3);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = (i % 256) as f32 / 255.0;
        }
        let bytes = img.to_pnm();
        assert!(bytes.starts_with(b"P6\n9 8\n255\n"));
        assert_eq!(Image::from_pnm(&bytes).unwrap(), img);
        let mut sil = Image::new(8, 8, 1);
        sil.set(3, 4, 0, 1.0);
        assert_eq!(Image::from_pnm(&sil.to_pnm()).unwrap(), sil);
        assert!(Image::from_pnm(b"P2\n1 1\n255\n0").is_err());
        assert!(Image::from_pnm(b"P5\n4 4\n255\n\x00").is_err());
    }

    #[test]
    fn planar_layout() {
        let img = Image::from_data(2, 1, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(img.to_planar(), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }
}
