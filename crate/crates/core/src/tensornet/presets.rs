//! The two update-network architectures used by the tasks.

use super::{Network, NetworkBuilder, TensorError};

/// Convolutional regressor over an image stack with the current estimate
/// appended before the fully connected tail:
/// `[conv k×k → relu → maxpool 2] × 2 → flatten → concat(x) → dense → relu → dense`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvNetConfig {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub aux_len: usize,
    pub out_len: usize,
    pub conv_channels: [usize; 2],
    pub kernel: usize,
    pub hidden: usize,
}

impl ConvNetConfig {
    pub fn new(channels: usize, height: usize, width: usize, aux_len: usize, out_len: usize) -> Self {
        ConvNetConfig {
            channels,
            height,
            width,
            aux_len,
            out_len,
            conv_channels: [8, 16],
            kernel: 5,
            hidden: 128,
        }
    }

    pub fn build(&self) -> Result<Network<f32>, TensorError> {
        NetworkBuilder::new(&[self.channels, self.height, self.width])
            .conv2d(self.conv_channels[0], self.kernel, 1)
            .relu()
            .max_pool(2)
            .conv2d(self.conv_channels[1], self.kernel, 1)
            .relu()
            .max_pool(2)
            .flatten()
            .concat_aux(self.aux_len)
            .dense(self.hidden)
            .relu()
            .dense(self.out_len)
            .build()
    }

    /// Closed-form parameter count.
    pub fn parameter_count(&self) -> usize {
        let k2 = self.kernel * self.kernel;
        let [c1, c2] = self.conv_channels;
        let h1 = (self.height - self.kernel + 1) / 2;
        let w1 = (self.width - self.kernel + 1) / 2;
        let h2 = (h1 - self.kernel + 1) / 2;
        let w2 = (w1 - self.kernel + 1) / 2;
        let flat = c2 * h2 * w2 + self.aux_len;
        (c1 * self.channels * k2 + c1)
            + (c2 * c1 * k2 + c2)
            + (flat * self.hidden + self.hidden)
            + (self.hidden * self.out_len + self.out_len)
    }
}

/// Multilayer perceptron with the auxiliary vector concatenated to the input:
/// `concat(x) → [dense → relu] × depth → dense`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpConfig {
    pub input_len: usize,
    pub aux_len: usize,
    pub out_len: usize,
    pub hidden: usize,
    pub depth: usize,
}

impl MlpConfig {
    pub fn new(input_len: usize, aux_len: usize, out_len: usize) -> Self {
        MlpConfig {
            input_len,
            aux_len,
            out_len,
            hidden: 256,
            depth: 3,
        }
    }

    pub fn build(&self) -> Result<Network<f32>, TensorError> {
        let mut b = NetworkBuilder::new(&[self.input_len]).concat_aux(self.aux_len);
        for _ in 0..self.depth {
            b = b.dense(self.hidden).relu();
        }
        b.dense(self.out_len).build()
    }

    pub fn parameter_count(&self) -> usize {
        let first = (self.input_len + self.aux_len) * self.hidden + self.hidden;
        let middle = (self.depth - 1) * (self.hidden * self.hidden + self.hidden);
        first + middle + self.hidden * self.out_len + self.out_len
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_network_parameter_count() {
        let cfg = ConvNetConfig::new(3, 64, 64, 7, 7);
        let net = cfg.build().unwrap();
        assert_eq!(net.parameter_count(), cfg.parameter_count());
        // 64 → 60 → 30 → 26 → 13; flatten 16·13·13 = 2704
        assert_eq!(cfg.parameter_count(), 608 + 3216 + (2711 * 128 + 128) + (128 * 7 + 7));
        assert_eq!(net.output_shape(), &[7]);
    }

    #[test]
    fn ik_network_parameter_count() {
        let joints = 8;
        let cfg = MlpConfig::new(9 * joints, 4 * joints, 4 * joints);
        let net = cfg.build().unwrap();
        assert_eq!(net.parameter_count(), cfg.parameter_count());
        assert_eq!(
            cfg.parameter_count(),
            (104 * 256 + 256) + 2 * (256 * 256 + 256) + (256 * 32 + 32)
        );
        assert_eq!(net.aux_index(), Some(0));
    }
}
