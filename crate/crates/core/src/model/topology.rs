use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{conv_output_len, pool_output_len};

/// Full-resolution input size the layer listing was designed for.
pub const BASE_WIDTH: usize = 512;
pub const BASE_HEIGHT: usize = 256;
pub const CHANNELS: usize = 3;
pub const MIN_WIDTH: usize = 8;
pub const NUM_CLASSES: usize = 2;

const POOL_KERNEL: usize = 3;
const POOL_STRIDE: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub base_width: usize,
    pub base_height: usize,
    /// 1 reproduces the full-size network; larger values shrink the input
    /// and every channel/feature width.
    pub scale_divisor: usize,
    /// Weight of the segmentation loss in the total objective.
    pub lambda: f64,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        Self {
            base_width: BASE_WIDTH,
            base_height: BASE_HEIGHT,
            scale_divisor: 1,
            lambda: 1e-3,
        }
    }
}

impl ArchitectureConfig {
    pub fn with_scale(scale_divisor: usize) -> Self {
        Self {
            scale_divisor,
            ..Self::default()
        }
    }

    pub fn input_width(&self) -> usize {
        self.base_width / self.scale_divisor.max(1)
    }

    pub fn input_height(&self) -> usize {
        self.base_height / self.scale_divisor.max(1)
    }

    /// Channel or feature width at this scale (never below [`MIN_WIDTH`]).
    pub fn width(&self, full: usize) -> usize {
        (full / self.scale_divisor.max(1)).max(MIN_WIDTH)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvLayer {
    pub fn fan_in(&self) -> usize {
        self.c_in * self.kernel * self.kernel
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolLayer {
    /// Effective window; the nominal 3×3 window is clamped to the feature
    /// map when the map is smaller (only happens at reduced scales).
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub channels: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl PoolLayer {
    pub fn out_len(&self) -> usize {
        self.channels * self.out_h * self.out_w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FcLayer {
    pub d_in: usize,
    pub d_out: usize,
}

/// Every layer's shape for one [`ArchitectureConfig`], computed without
/// allocating any weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub input: [usize; 3],
    pub conv1: ConvLayer,
    pub pool1: PoolLayer,
    pub conv2: ConvLayer,
    pub pool2: PoolLayer,
    pub conv3: ConvLayer,
    pub conv4: ConvLayer,
    pub pool3: PoolLayer,
    pub fc1: FcLayer,
    pub fc2: FcLayer,
    pub cls: FcLayer,
    pub fc3: FcLayer,
    pub fc4: FcLayer,
}

fn conv(name: &str, c_in: usize, c_out: usize, kernel: usize, stride: usize, h: usize, w: usize) -> Result<ConvLayer> {
    let pad = kernel / 2;
    match (conv_output_len(h, kernel, stride, pad), conv_output_len(w, kernel, stride, pad)) {
        (Some(out_h), Some(out_w)) => Ok(ConvLayer {
            c_in,
            c_out,
            kernel,
            stride,
            pad,
            out_h,
            out_w,
        }),
        _ => Err(Error::Config(format!(
            "layer {name} collapses: kernel {kernel} does not fit a {h}x{w} input"
        ))),
    }
}

fn pool(name: &str, channels: usize, h: usize, w: usize) -> Result<PoolLayer> {
    let kernel_h = POOL_KERNEL.min(h);
    let kernel_w = POOL_KERNEL.min(w);
    match (
        pool_output_len(h, kernel_h, POOL_STRIDE),
        pool_output_len(w, kernel_w, POOL_STRIDE),
    ) {
        (Some(out_h), Some(out_w)) => Ok(PoolLayer {
            kernel_h,
            kernel_w,
            stride: POOL_STRIDE,
            channels,
            out_h,
            out_w,
        }),
        _ => Err(Error::Config(format!("layer {name} collapses on a {h}x{w} input"))),
    }
}

impl Topology {
    pub fn plan(config: &ArchitectureConfig) -> Result<Self> {
        if config.scale_divisor == 0 {
            return Err(Error::Config("scale_divisor must be positive".into()));
        }
        if !(config.lambda.is_finite() && config.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", config.lambda)));
        }
        let (w, h) = (config.input_width(), config.input_height());
        if w == 0 || h == 0 {
            return Err(Error::Config(format!(
                "layer input collapses: {}x{} divided by {} is empty",
                config.base_width, config.base_height, config.scale_divisor
            )));
        }
        let c1 = config.width(96);
        let c2 = config.width(256);
        let c3 = config.width(384);
        let c4 = config.width(256);

        let conv1 = conv("conv1", CHANNELS, c1, 11, 4, h, w)?;
        let pool1 = pool("pool1", c1, conv1.out_h, conv1.out_w)?;
        let conv2 = conv("conv2", c1, c2, 5, 1, pool1.out_h, pool1.out_w)?;
        let pool2 = pool("pool2", c2, conv2.out_h, conv2.out_w)?;
        let conv3 = conv("conv3", c2, c3, 3, 1, pool2.out_h, pool2.out_w)?;
        let conv4 = conv("conv4", c3, c4, 3, 1, conv3.out_h, conv3.out_w)?;
        let pool3 = pool("pool3", c4, conv4.out_h, conv4.out_w)?;

        let fc1 = FcLayer {
            d_in: pool3.out_len(),
            d_out: config.width(256),
        };
        let fc3 = FcLayer {
            d_in: pool2.out_len(),
            d_out: config.width(2048),
        };
        let fc2 = FcLayer {
            d_in: fc1.d_out + fc3.d_out,
            d_out: config.width(256),
        };
        let cls = FcLayer {
            d_in: fc2.d_out,
            d_out: NUM_CLASSES,
        };
        let fc4 = FcLayer {
            d_in: fc3.d_out,
            d_out: w * h,
        };
        Ok(Self {
            input: [CHANNELS, h, w],
            conv1,
            pool1,
            conv2,
            pool2,
            conv3,
            conv4,
            pool3,
            fc1,
            fc2,
            cls,
            fc3,
            fc4,
        })
    }

    /// `(name, shape, fan_in)` for every parameter in declaration order.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>, usize)> {
        let mut out = Vec::new();
        for (name, c) in [
            ("conv1", &self.conv1),
            ("conv2", &self.conv2),
            ("conv3", &self.conv3),
            ("conv4", &self.conv4),
        ] {
            out.push((format!("{name}.w"), vec![c.c_out, c.c_in, c.kernel, c.kernel], c.fan_in()));
            out.push((format!("{name}.b"), vec![c.c_out], c.fan_in()));
        }
        for (name, f) in [
            ("fc1", &self.fc1),
            ("fc2", &self.fc2),
            ("cls", &self.cls),
            ("fc3", &self.fc3),
            ("fc4", &self.fc4),
        ] {
            out.push((format!("{name}.w"), vec![f.d_out, f.d_in], f.d_in));
            out.push((format!("{name}.b"), vec![f.d_out], f.d_in));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_shapes()
            .iter()
            .map(|(_, s, _)| s.iter().product::<usize>())
            .sum()
    }

    pub fn segmentation_len(&self) -> usize {
        self.fc4.d_out
    }
}

/// CONV1 and CONV2 feed both branches.
pub fn is_shared(param_name: &str) -> bool {
    param_name.starts_with("conv1.") || param_name.starts_with("conv2.")
}

/// Parameters reached only by the segmentation loss.
pub fn is_segmentation_only(param_name: &str) -> bool {
    param_name.starts_with("fc4.")
}
