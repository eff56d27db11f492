/// A per-pixel boolean raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Packs rows at one bit per pixel, most significant bit first; each row
    /// is padded to a whole byte.
    pub fn to_packed_rows(&self) -> Vec<u8> {
        let row_bytes = (self.width as usize).div_ceil(8);
        let mut out = vec![0u8; row_bytes * self.height as usize];
        for y in 0..self.height as usize {
            for x in 0..self.width as usize {
                if self.bits[y * self.width as usize + x] {
                    out[y * row_bytes + x / 8] |= 0x80 >> (x % 8);
                }
            }
        }
        out
    }

    pub fn from_packed_rows(width: u32, height: u32, packed: &[u8]) -> Option<Self> {
        let row_bytes = (width as usize).div_ceil(8);
        if packed.len() != row_bytes * height as usize {
            return None;
        }
        let mut m = Self::new(width, height);
        for y in 0..height as usize {
            for x in 0..width as usize {
                m.bits[y * width as usize + x] = packed[y * row_bytes + x / 8] & (0x80 >> (x % 8)) != 0;
            }
        }
        Some(m)
    }

    /// 0 for background, 255 for set pixels.
    pub fn to_u8(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect()
    }
}
