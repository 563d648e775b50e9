use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Single-channel image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::contract(
                "GrayImage::new",
                format!("{width}x{height} image with {} values", data.len()),
            ));
        }
        Ok(Self { width, height, data })
    }

    /// Luminance of a `[3, H, W]` image.
    pub fn from_rgb(image: &Tensor) -> Self {
        Self {
            width: image.shape()[2],
            height: image.shape()[1],
            data: crate::datagen::to_gray(image),
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Pixel with coordinates clamped to the border.
    #[inline]
    fn clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.at(x, y)
    }

    /// Bilinear resampling with pixel centers aligned.
    pub fn resize(&self, width: usize, height: usize) -> Self {
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).max(0.0);
            let y0 = (fy as usize).min(self.height - 1);
            let y1 = (y0 + 1).min(self.height - 1);
            let ty = fy - y0 as f64;
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).max(0.0);
                let x0 = (fx as usize).min(self.width - 1);
                let x1 = (x0 + 1).min(self.width - 1);
                let tx = fx - x0 as f64;
                let top = self.at(x0, y0) * (1.0 - tx) + self.at(x1, y0) * tx;
                let bottom = self.at(x0, y1) * (1.0 - tx) + self.at(x1, y1) * tx;
                data.push(top * (1.0 - ty) + bottom * ty);
            }
        }
        Self { width, height, data }
    }

    pub fn crop(&self, x: usize, y: usize, width: usize, height: usize) -> Self {
        assert!(x + width <= self.width && y + height <= self.height);
        let mut data = Vec::with_capacity(width * height);
        for row in y..y + height {
            data.extend_from_slice(&self.data[row * self.width + x..row * self.width + x + width]);
        }
        Self { width, height, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HogParams {
    pub window_width: usize,
    pub window_height: usize,
    pub cell: usize,
    /// Block side in cells.
    pub block: usize,
    pub bins: usize,
    pub clip: f64,
    pub epsilon: f64,
}

impl Default for HogParams {
    fn default() -> Self {
        Self {
            window_width: 64,
            window_height: 128,
            cell: 8,
            block: 2,
            bins: 9,
            clip: 0.2,
            epsilon: 1e-3,
        }
    }
}

impl HogParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.cell > 0
            && self.block > 0
            && self.bins > 0
            && self.window_width % self.cell == 0
            && self.window_height % self.cell == 0
            && self.window_width / self.cell >= self.block
            && self.window_height / self.cell >= self.block
            && self.clip > 0.0
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("inconsistent HoG parameters {self:?}")))
        }
    }

    pub fn window_cells(&self) -> (usize, usize) {
        (self.window_width / self.cell, self.window_height / self.cell)
    }

    /// Blocks per window along x and y (block stride is one cell).
    pub fn window_blocks(&self) -> (usize, usize) {
        let (cx, cy) = self.window_cells();
        (cx + 1 - self.block, cy + 1 - self.block)
    }

    pub fn block_len(&self) -> usize {
        self.block * self.block * self.bins
    }

    pub fn descriptor_len(&self) -> usize {
        let (bx, by) = self.window_blocks();
        bx * by * self.block_len()
    }
}

/// Centered-difference gradient `(gx, gy)` at a pixel, borders clamped.
#[inline]
pub fn gradient(img: &GrayImage, x: usize, y: usize) -> (f64, f64) {
    let (xi, yi) = (x as isize, y as isize);
    (
        img.clamped(xi + 1, yi) - img.clamped(xi - 1, yi),
        img.clamped(xi, yi + 1) - img.clamped(xi, yi - 1),
    )
}

/// Unsigned orientation in degrees, `[0, 180)`.
#[inline]
pub fn orientation(gx: f64, gy: f64) -> f64 {
    let deg = gy.atan2(gx).to_degrees().rem_euclid(180.0);
    if deg >= 180.0 {
        0.0
    } else {
        deg
    }
}

/// Splits a vote between the two nearest bin centers (`(k + 0.5) * 180 / bins`),
/// wrapping around 0/180 degrees.
#[inline]
fn vote(hist: &mut [f64], theta: f64, magnitude: f64) {
    let bins = hist.len();
    let pos = theta * bins as f64 / 180.0 - 0.5;
    let lo = pos.floor();
    let frac = pos - lo;
    let lo = (lo as isize).rem_euclid(bins as isize) as usize;
    hist[lo] += magnitude * (1.0 - frac);
    hist[(lo + 1) % bins] += magnitude * frac;
}

fn l2_hys(v: &mut [f64], clip: f64, eps: f64) {
    let normalize = |v: &mut [f64]| {
        let n = (v.iter().map(|x| x * x).sum::<f64>() + eps * eps).sqrt();
        v.iter_mut().for_each(|x| *x /= n);
    };
    normalize(v);
    v.iter_mut().for_each(|x| *x = x.min(clip));
    normalize(v);
}

/// Block-normalized HoG features over a whole image; any cell-aligned
/// window's descriptor is a gather over these blocks.
#[derive(Debug, Clone)]
pub struct HogMap {
    params: HogParams,
    pub cells_x: usize,
    pub cells_y: usize,
    blocks_x: usize,
    blocks_y: usize,
    blocks: Vec<f64>,
}

impl HogMap {
    pub fn new(img: &GrayImage, params: &HogParams) -> Result<Self> {
        params.validate()?;
        let cells_x = img.width / params.cell;
        let cells_y = img.height / params.cell;
        if cells_x < params.block || cells_y < params.block {
            return Err(Error::contract(
                "HogMap::new",
                format!("{}x{} image is smaller than one block", img.width, img.height),
            ));
        }
        let bins = params.bins;
        let mut cells = vec![0.0; cells_x * cells_y * bins];
        for y in 0..cells_y * params.cell {
            for x in 0..cells_x * params.cell {
                let (gx, gy) = gradient(img, x, y);
                let m = (gx * gx + gy * gy).sqrt();
                if m == 0.0 {
                    continue;
                }
                let c = (y / params.cell) * cells_x + x / params.cell;
                vote(&mut cells[c * bins..(c + 1) * bins], orientation(gx, gy), m);
            }
        }
        let blocks_x = cells_x + 1 - params.block;
        let blocks_y = cells_y + 1 - params.block;
        let bl = params.block_len();
        let mut blocks = vec![0.0; blocks_x * blocks_y * bl];
        for by in 0..blocks_y {
            for bx in 0..blocks_x {
                let out = &mut blocks[(by * blocks_x + bx) * bl..][..bl];
                let mut k = 0;
                for dy in 0..params.block {
                    for dx in 0..params.block {
                        let c = (by + dy) * cells_x + bx + dx;
                        out[k..k + bins].copy_from_slice(&cells[c * bins..(c + 1) * bins]);
                        k += bins;
                    }
                }
                l2_hys(out, params.clip, params.epsilon);
            }
        }
        Ok(Self {
            params: params.clone(),
            cells_x,
            cells_y,
            blocks_x,
            blocks_y,
            blocks,
        })
    }

    pub fn params(&self) -> &HogParams {
        &self.params
    }

    /// Number of window positions `(x, y)` in cell units.
    pub fn window_positions(&self) -> (usize, usize) {
        let (wx, wy) = self.params.window_cells();
        (
            (self.cells_x + 1).saturating_sub(wx),
            (self.cells_y + 1).saturating_sub(wy),
        )
    }

    /// Descriptor of the window whose top-left cell is `(cx, cy)`.
    pub fn window(&self, cx: usize, cy: usize, out: &mut Vec<f64>) {
        let (nbx, nby) = self.params.window_blocks();
        assert!(cx + nbx <= self.blocks_x && cy + nby <= self.blocks_y, "window out of range");
        let bl = self.params.block_len();
        out.clear();
        for by in cy..cy + nby {
            let start = (by * self.blocks_x + cx) * bl;
            out.extend_from_slice(&self.blocks[start..start + nbx * bl]);
        }
    }

    /// Dot product of the window descriptor with `w`, without materializing it.
    pub fn window_dot(&self, cx: usize, cy: usize, w: &[f64]) -> f64 {
        let (nbx, nby) = self.params.window_blocks();
        let bl = self.params.block_len();
        let row = nbx * bl;
        let mut acc = 0.0;
        for (r, by) in (cy..cy + nby).enumerate() {
            let start = (by * self.blocks_x + cx) * bl;
            acc += self.blocks[start..start + row]
                .iter()
                .zip(&w[r * row..(r + 1) * row])
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
        acc
    }
}

/// HoG descriptor of a single window image (borders clamped at the window
/// edge). Blocks are laid out row-major, each holding its cells row-major.
pub fn hog_descriptor(window: &GrayImage, params: &HogParams) -> Result<Vec<f64>> {
    if window.width != params.window_width || window.height != params.window_height {
        return Err(Error::contract(
            "hog_descriptor",
            format!(
                "window is {}x{}, expected {}x{}",
                window.width, window.height, params.window_width, params.window_height
            ),
        ));
    }
    let map = HogMap::new(window, params)?;
    let mut out = Vec::with_capacity(params.descriptor_len());
    map.window(0, 0, &mut out);
    Ok(out)
}
