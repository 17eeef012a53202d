//! Attention-free U-Net on 2D or 3D grids.
//!
//! Layers keep clones of their parameter tensors; a clone shares storage
//! and identity with the owning `Var`, so `Var::set` and gradient lookup
//! see the same tensor.

use candle_core::{DType, Device, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::UNetArch;
use crate::error::Result;

const GN_EPS: f64 = 1e-5;

/// Creates parameters in a fixed order from a seeded generator.
pub(crate) struct ParamInit {
    rng: ChaCha8Rng,
    zero: bool,
    dtype: DType,
    device: Device,
    pub(crate) vars: Vec<Var>,
}

impl ParamInit {
    pub(crate) fn new(seed: u64, zero: bool, dtype: DType) -> Self {
        ParamInit {
            rng: ChaCha8Rng::seed_from_u64(seed),
            zero,
            dtype,
            device: Device::Cpu,
            vars: Vec::new(),
        }
    }

    fn push(&mut self, values: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        let t = Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        let tensor = var.as_tensor().clone();
        self.vars.push(var);
        Ok(tensor)
    }

    fn normal(&mut self, shape: &[usize], std: f64) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let values = if self.zero {
            vec![0.0; n]
        } else {
            let dist = Normal::new(0.0, std).expect("positive std");
            (0..n).map(|_| dist.sample(&mut self.rng)).collect()
        };
        self.push(values, shape)
    }

    fn constant(&mut self, shape: &[usize], value: f64) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let v = if self.zero { 0.0 } else { value };
        self.push(vec![v; n], shape)
    }
}

fn bias_shape(channels: usize, spatial_dim: usize) -> Vec<usize> {
    let mut s = vec![1, channels];
    s.extend(std::iter::repeat_n(1, spatial_dim));
    s
}

struct Conv {
    w: Tensor,
    b: Tensor,
    kernel: usize,
    out: usize,
    dim: usize,
}

impl Conv {
    fn new(p: &mut ParamInit, cin: usize, cout: usize, kernel: usize, dim: usize) -> Result<Self> {
        let mut shape = vec![cout, cin];
        shape.extend(std::iter::repeat_n(kernel, dim));
        let fan_in = cin * kernel.pow(dim as u32);
        Ok(Conv {
            w: p.normal(&shape, (1.0 / fan_in as f64).sqrt())?,
            b: p.constant(&[cout], 0.0)?,
            kernel,
            out: cout,
            dim,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let pad = self.kernel / 2;
        let y = if self.dim == 2 {
            x.conv2d(&self.w, pad, 1, 1, 1)?
        } else {
            self.forward_3d(x, pad)?
        };
        Ok(y.broadcast_add(&self.b.reshape(bias_shape(self.out, self.dim))?)?)
    }

    /// 3D convolution as a sum of 2D convolutions over depth offsets.
    fn forward_3d(&self, x: &Tensor, pad: usize) -> Result<Tensor> {
        let (b, c, d, h, w) = x.dims5()?;
        let xp = if pad > 0 { x.pad_with_zeros(2, pad, pad)? } else { x.clone() };
        // (B, D + 2p, C, H, W): depth next to batch so slabs fold into it
        let xp = xp.permute((0, 2, 1, 3, 4))?.contiguous()?;
        let mut acc: Option<Tensor> = None;
        for kd in 0..self.kernel {
            let slab = xp.narrow(1, kd, d)?.contiguous()?.reshape((b * d, c, h, w))?;
            let wk = self.w.narrow(2, kd, 1)?.squeeze(2)?.contiguous()?;
            let y = slab.conv2d(&wk, pad, 1, 1, 1)?;
            acc = Some(match acc {
                None => y,
                Some(a) => (a + y)?,
            });
        }
        let y = acc.expect("kernel >= 1").reshape((b, d, self.out, h, w))?;
        Ok(y.permute((0, 2, 1, 3, 4))?.contiguous()?)
    }
}

struct Linear {
    w: Tensor,
    b: Tensor,
}

impl Linear {
    fn new(p: &mut ParamInit, fan_in: usize, out: usize) -> Result<Self> {
        Ok(Linear {
            w: p.normal(&[out, fan_in], (1.0 / fan_in as f64).sqrt())?,
            b: p.constant(&[out], 0.0)?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.matmul(&self.w.t()?)?.broadcast_add(&self.b)?)
    }
}

struct GroupNorm {
    gamma: Tensor,
    beta: Tensor,
    groups: usize,
    channels: usize,
    dim: usize,
}

impl GroupNorm {
    fn new(p: &mut ParamInit, channels: usize, max_groups: usize, dim: usize) -> Result<Self> {
        let groups = (1..=max_groups.min(channels))
            .rev()
            .find(|g| channels.is_multiple_of(*g))
            .unwrap_or(1);
        Ok(GroupNorm {
            gamma: p.constant(&[channels], 1.0)?,
            beta: p.constant(&[channels], 0.0)?,
            groups,
            channels,
            dim,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let dims = x.dims().to_vec();
        let xg = x.reshape((dims[0], self.groups, ()))?;
        let mean = xg.mean_keepdim(2)?;
        let centred = xg.broadcast_sub(&mean)?;
        let var = centred.sqr()?.mean_keepdim(2)?;
        let normed = centred.broadcast_div(&(var + GN_EPS)?.sqrt()?)?.reshape(dims)?;
        let shape = bias_shape(self.channels, self.dim);
        Ok(normed
            .broadcast_mul(&self.gamma.reshape(shape.clone())?)?
            .broadcast_add(&self.beta.reshape(shape)?)?)
    }
}

struct ResBlock {
    norm1: GroupNorm,
    conv1: Conv,
    time: Linear,
    norm2: GroupNorm,
    conv2: Conv,
    skip: Option<Conv>,
    out: usize,
    dim: usize,
}

impl ResBlock {
    fn new(p: &mut ParamInit, cin: usize, cout: usize, arch: &UNetArch) -> Result<Self> {
        let dim = arch.spatial_dim;
        Ok(ResBlock {
            norm1: GroupNorm::new(p, cin, arch.groups, dim)?,
            conv1: Conv::new(p, cin, cout, 3, dim)?,
            time: Linear::new(p, arch.time_dim(), cout)?,
            norm2: GroupNorm::new(p, cout, arch.groups, dim)?,
            conv2: Conv::new(p, cout, cout, 3, dim)?,
            skip: if cin != cout {
                Some(Conv::new(p, cin, cout, 1, dim)?)
            } else {
                None
            },
            out: cout,
            dim,
        })
    }

    fn forward(&self, x: &Tensor, temb: &Tensor) -> Result<Tensor> {
        let h = self.conv1.forward(&self.norm1.forward(x)?.silu()?)?;
        let mut shape = vec![temb.dims()[0], self.out];
        shape.extend(std::iter::repeat_n(1, self.dim));
        let h = h.broadcast_add(&self.time.forward(temb)?.reshape(shape)?)?;
        let h = self.conv2.forward(&self.norm2.forward(&h)?.silu()?)?;
        let skip = match &self.skip {
            Some(c) => c.forward(x)?,
            None => x.clone(),
        };
        Ok((skip + h)?)
    }
}

fn avg_pool(x: &Tensor, dim: usize) -> Result<Tensor> {
    let d = x.dims();
    Ok(if dim == 2 {
        x.reshape((d[0], d[1], d[2] / 2, 2, d[3] / 2, 2))?.mean(5)?.mean(3)?
    } else {
        x.reshape(vec![d[0], d[1], d[2] / 2, 2, d[3] / 2, 2, d[4] / 2, 2])?
            .mean(7)?
            .mean(5)?
            .mean(3)?
    })
}

fn upsample_nearest(x: &Tensor, dim: usize) -> Result<Tensor> {
    let d = x.dims();
    let (mut unit, mut wide, mut out) = (vec![d[0], d[1]], vec![d[0], d[1]], vec![d[0], d[1]]);
    for &n in &d[2..2 + dim] {
        unit.extend([n, 1]);
        wide.extend([n, 2]);
        out.push(2 * n);
    }
    Ok(x.reshape(unit)?.broadcast_as(wide)?.contiguous()?.reshape(out)?)
}

/// Sinusoidal features of the diffusion step, one row per batch element.
fn timestep_features(t: &[usize], width: usize, dtype: DType) -> Result<Tensor> {
    let half = width / 2;
    let mut v = Vec::with_capacity(t.len() * width);
    for &step in t {
        let (mut sin, mut cos) = (Vec::with_capacity(half), Vec::with_capacity(half));
        for i in 0..half {
            let freq = (-(10_000f64.ln()) * i as f64 / half as f64).exp();
            let arg = step as f64 * freq;
            sin.push(arg.sin());
            cos.push(arg.cos());
        }
        v.extend(sin);
        v.extend(cos);
    }
    Ok(Tensor::from_vec(v, (t.len(), width), &Device::Cpu)?.to_dtype(dtype)?)
}

pub(crate) struct UNet {
    time_in: Linear,
    time_out: Linear,
    conv_in: Conv,
    down: Vec<ResBlock>,
    down_convs: Vec<Conv>,
    middle: Vec<ResBlock>,
    up: Vec<ResBlock>,
    up_convs: Vec<Conv>,
    norm_out: GroupNorm,
    conv_out: Conv,
    dim: usize,
    features: usize,
    dtype: DType,
}

impl UNet {
    pub(crate) fn new(arch: &UNetArch, p: &mut ParamInit) -> Result<Self> {
        let dim = arch.spatial_dim;
        let chans: Vec<usize> = arch
            .channel_multipliers
            .iter()
            .map(|m| m * arch.base_channels)
            .collect();
        let levels = chans.len();
        let time_in = Linear::new(p, arch.base_channels, arch.time_dim())?;
        let time_out = Linear::new(p, arch.time_dim(), arch.time_dim())?;
        let conv_in = Conv::new(p, arch.in_channels(), arch.base_channels, 3, dim)?;
        let mut down = Vec::with_capacity(levels);
        let mut down_convs = Vec::with_capacity(levels - 1);
        let mut prev = arch.base_channels;
        for (l, &c) in chans.iter().enumerate() {
            down.push(ResBlock::new(p, prev, c, arch)?);
            if l + 1 < levels {
                down_convs.push(Conv::new(p, c, c, 3, dim)?);
            }
            prev = c;
        }
        let mut middle = Vec::with_capacity(arch.middle_channels.len());
        for &m in &arch.middle_channels {
            middle.push(ResBlock::new(p, prev, m, arch)?);
            prev = m;
        }
        // up[l] consumes the level-l skip; up_convs[l] maps level l+1 -> l
        let mut up: Vec<Option<ResBlock>> = (0..levels).map(|_| None).collect();
        let mut up_convs: Vec<Option<Conv>> = (0..levels - 1).map(|_| None).collect();
        for l in (0..levels).rev() {
            up[l] = Some(ResBlock::new(p, prev + chans[l], chans[l], arch)?);
            prev = chans[l];
            if l > 0 {
                up_convs[l - 1] = Some(Conv::new(p, chans[l], chans[l - 1], 3, dim)?);
                prev = chans[l - 1];
            }
        }
        let norm_out = GroupNorm::new(p, chans[0], arch.groups, dim)?;
        let conv_out = Conv::new(p, chans[0], arch.out_channels(), 3, dim)?;
        Ok(UNet {
            time_in,
            time_out,
            conv_in,
            down,
            down_convs,
            middle,
            up: up.into_iter().map(Option::unwrap).collect(),
            up_convs: up_convs.into_iter().map(Option::unwrap).collect(),
            norm_out,
            conv_out,
            dim,
            features: arch.base_channels,
            dtype: p.dtype,
        })
    }

    /// `x`: `(B, C_in, N, ..)`; one diffusion step per batch element.
    pub(crate) fn forward(&self, x: &Tensor, t: &[usize]) -> Result<Tensor> {
        let feats = timestep_features(t, self.features, self.dtype)?;
        let temb = self
            .time_out
            .forward(&self.time_in.forward(&feats)?.silu()?)?
            .silu()?;
        let mut h = self.conv_in.forward(x)?;
        let mut skips = Vec::with_capacity(self.down.len());
        for (l, block) in self.down.iter().enumerate() {
            h = block.forward(&h, &temb)?;
            skips.push(h.clone());
            if let Some(conv) = self.down_convs.get(l) {
                h = conv.forward(&avg_pool(&h, self.dim)?)?;
            }
        }
        for block in &self.middle {
            h = block.forward(&h, &temb)?;
        }
        for l in (0..self.up.len()).rev() {
            h = Tensor::cat(&[&h, &skips[l]], 1)?;
            h = self.up[l].forward(&h, &temb)?;
            if l > 0 {
                h = self.up_convs[l - 1].forward(&upsample_nearest(&h, self.dim)?)?;
            }
        }
        self.conv_out.forward(&self.norm_out.forward(&h)?.silu()?)
    }
}
