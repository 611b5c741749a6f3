//! The four learnable transformations: constrained spatial and spectral
//! degradations (`F_y`, `F_z`) and the spatial and spectral
//! super-resolvers (`G_y`, `G_z`). All parameters live in one flat buffer
//! described by a [`ModelLayout`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand_distr::{Distribution, StandardNormal};

use crate::degradation::{band_mix, band_mix_backward, blur_decimate, blur_decimate_backward, PsfKernel, SrfMatrix};
use crate::error::{shape_err, Error, Result};
use crate::nn::{
    relu, relu_backward, sigmoid, sigmoid_backward, softmax, softmax_backward, BicubicUpsampler, Conv, ConvCache,
    InstanceNorm, NormCache,
};
use crate::scalar::{lit, Scalar};
use crate::seeds;
use crate::tensor::Tensor;

/// Floor applied to known kernel/SRF weights before taking logs.
pub const LOGIT_FLOOR: f64 = 1e-12;

/// Network dimensions for one `(L, l, S)` problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub hsi_bands: usize,
    pub msi_bands: usize,
    pub scale: usize,
    /// Hidden widths. The spatial upsampler uses `widths[i]` (last entry
    /// repeated) for its `log2(S)` interpolation blocks and the last entry
    /// for the refining layer; the spectral upsampler uses every entry as a
    /// hidden 1×1 layer.
    pub widths: Vec<usize>,
}

impl Architecture {
    /// Table defaults for 31-band indoor data at ratio 32.
    pub const DEFAULT_WIDTHS: [usize; 5] = [32, 64, 128, 128, 128];

    pub fn new(hsi_bands: usize, msi_bands: usize, scale: usize, widths: Vec<usize>) -> Result<Self> {
        let arch = Self { hsi_bands, msi_bands, scale, widths };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hsi_bands == 0 || self.msi_bands == 0 {
            return Err(Error::Config("band counts must be positive".into()));
        }
        if self.scale == 0 || !self.scale.is_power_of_two() {
            return Err(Error::Config(format!("scale {} is not a power of two", self.scale)));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::Config("widths must be a non-empty list of positive integers".into()));
        }
        Ok(())
    }

    pub fn upsampling_blocks(&self) -> usize {
        self.scale.trailing_zeros() as usize
    }

    pub fn block_width(&self, i: usize) -> usize {
        self.widths[i.min(self.widths.len() - 1)]
    }

    pub fn refine_width(&self) -> usize {
        *self.widths.last().expect("validated non-empty")
    }
}

/// How the PSF/SRF logits are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogitInit {
    /// Kaiming-normal draws, as for the convolution weights.
    #[default]
    Kaiming,
    /// All-zero logits: uniform kernel and uniform SRF rows.
    Uniform,
}

/// What a parameter tensor is, for checkpoints and optimizer masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Psf,
    Srf,
    SpatialUp,
    SpectralUp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub group: ParamGroup,
    pub range: Range<usize>,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ConvNorm {
    conv: Conv,
    norm: InstanceNorm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelLayout {
    arch: Architecture,
    psf: Range<usize>,
    srf: Range<usize>,
    spa_blocks: Vec<ConvNorm>,
    spa_refine: ConvNorm,
    spa_head: Conv,
    spe_hidden: Vec<ConvNorm>,
    spe_head: Conv,
    segments: Vec<Segment>,
    len: usize,
}

struct LayoutBuilder {
    segments: Vec<Segment>,
    len: usize,
}

impl LayoutBuilder {
    fn take(&mut self, name: String, group: ParamGroup, shape: Vec<usize>) -> usize {
        let n: usize = shape.iter().product();
        let start = self.len;
        self.len += n;
        self.segments.push(Segment { name, group, range: start..self.len, shape });
        start
    }

    fn conv(&mut self, prefix: &str, group: ParamGroup, cin: usize, cout: usize, k: usize) -> Conv {
        let weight = self.take(format!("{prefix}.weight"), group, vec![cout, cin, k, k]);
        let bias = self.take(format!("{prefix}.bias"), group, vec![cout]);
        Conv { cin, cout, ksize: k, weight, bias }
    }

    fn conv_norm(&mut self, prefix: &str, group: ParamGroup, cin: usize, cout: usize, k: usize) -> ConvNorm {
        let conv = self.conv(&format!("{prefix}.conv"), group, cin, cout, k);
        let scale = self.take(format!("{prefix}.norm.scale"), group, vec![cout]);
        let shift = self.take(format!("{prefix}.norm.shift"), group, vec![cout]);
        ConvNorm { conv, norm: InstanceNorm { channels: cout, scale, shift } }
    }
}

impl ModelLayout {
    pub fn new(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let (big_l, l, s) = (arch.hsi_bands, arch.msi_bands, arch.scale);
        let mut b = LayoutBuilder { segments: Vec::new(), len: 0 };
        let psf = b.take("psf.logits".into(), ParamGroup::Psf, vec![s, s]);
        let srf = b.take("srf.logits".into(), ParamGroup::Srf, vec![l, big_l]);
        let mut cin = big_l;
        let mut spa_blocks = Vec::new();
        for i in 0..arch.upsampling_blocks() {
            let w = arch.block_width(i);
            spa_blocks.push(b.conv_norm(&format!("spa.block{i}"), ParamGroup::SpatialUp, cin, w, 3));
            cin = w;
        }
        let rw = arch.refine_width();
        let spa_refine = b.conv_norm("spa.refine", ParamGroup::SpatialUp, cin, rw, 1);
        let spa_head = b.conv("spa.head", ParamGroup::SpatialUp, rw, big_l, 1);
        let mut cin = l;
        let mut spe_hidden = Vec::new();
        for (i, &w) in arch.widths.iter().enumerate() {
            spe_hidden.push(b.conv_norm(&format!("spe.layer{i}"), ParamGroup::SpectralUp, cin, w, 1));
            cin = w;
        }
        let spe_head = b.conv("spe.head", ParamGroup::SpectralUp, cin, big_l, 1);
        Ok(Self {
            psf: psf..psf + s * s,
            srf: srf..srf + l * big_l,
            arch,
            spa_blocks,
            spa_refine,
            spa_head,
            spe_hidden,
            spe_head,
            segments: b.segments,
            len: b.len,
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn psf_range(&self) -> Range<usize> {
        self.psf.clone()
    }

    pub fn srf_range(&self) -> Range<usize> {
        self.srf.clone()
    }

    pub fn upsampling_blocks(&self) -> usize {
        self.spa_blocks.len()
    }

    /// Parameter ranges of one group, in layout order.
    pub fn group_ranges(&self, group: ParamGroup) -> impl Iterator<Item = Range<usize>> + '_ {
        self.segments.iter().filter(move |s| s.group == group).map(|s| s.range.clone())
    }

    fn convs(&self) -> impl Iterator<Item = &Conv> {
        self.spa_blocks
            .iter()
            .chain(core::iter::once(&self.spa_refine))
            .map(|cn| &cn.conv)
            .chain(core::iter::once(&self.spa_head))
            .chain(self.spe_hidden.iter().map(|cn| &cn.conv))
            .chain(core::iter::once(&self.spe_head))
    }

    fn norms(&self) -> impl Iterator<Item = &InstanceNorm> {
        self.spa_blocks
            .iter()
            .chain(core::iter::once(&self.spa_refine))
            .chain(self.spe_hidden.iter())
            .map(|cn| &cn.norm)
    }
}

/// Logits of the PSF kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfLogits<T> {
    pub scale: usize,
    pub logits: Vec<T>,
}

/// Logits of the SRF matrix, `msi_bands × hsi_bands` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SrfLogits<T> {
    pub msi_bands: usize,
    pub hsi_bands: usize,
    pub logits: Vec<T>,
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
}

/// Softmax over the whole `S×S` grid.
pub fn psf_kernel<T: Scalar>(p: &PsfLogits<T>) -> Result<PsfKernel> {
    if p.logits.len() != p.scale * p.scale {
        return Err(shape_err!("{} logits for a {}x{} kernel", p.logits.len(), p.scale, p.scale));
    }
    PsfKernel::new(p.scale, to_f64(&softmax(&p.logits)))
}

/// Softmax applied independently to each row.
pub fn srf_matrix<T: Scalar>(p: &SrfLogits<T>) -> Result<SrfMatrix> {
    if p.hsi_bands == 0 || p.logits.len() != p.msi_bands * p.hsi_bands {
        return Err(shape_err!("{} logits for a {}x{} SRF", p.logits.len(), p.msi_bands, p.hsi_bands));
    }
    SrfMatrix::new(p.msi_bands, p.hsi_bands, to_f64(&row_softmax(&p.logits, p.hsi_bands)))
}

fn row_softmax<T: Scalar>(logits: &[T], row_len: usize) -> Vec<T> {
    logits.chunks(row_len).flat_map(softmax).collect()
}

/// Outputs and saved state of one conv → IN → ReLU step.
#[derive(Debug, Clone)]
struct StepCache<T> {
    conv: ConvCache<T>,
    norm: NormCache<T>,
    out: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct GyCache<T> {
    ups: Vec<BicubicUpsampler<T>>,
    blocks: Vec<StepCache<T>>,
    refine: StepCache<T>,
    head: ConvCache<T>,
    pub out: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct GzCache<T> {
    hidden: Vec<StepCache<T>>,
    head: ConvCache<T>,
    pub out: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct FyCache<T> {
    input: Tensor<T>,
    kernel: Vec<T>,
    pub out: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct FzCache<T> {
    input: Tensor<T>,
    srf: Vec<T>,
    pub out: Tensor<T>,
}

/// All learnable parameters plus the non-blind freeze flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    layout: ModelLayout,
    pub values: Vec<T>,
    pub frozen_degradation: bool,
}

impl<T: Scalar> ModelParams<T> {
    /// Kaiming-normal (fan-in, ReLU gain) convolution weights, zero biases,
    /// identity instance-norm affine maps. Deterministic in `seed`.
    pub fn init(arch: Architecture, seed: u64, logit_init: LogitInit) -> Result<Self> {
        let layout = ModelLayout::new(arch)?;
        let mut values = vec![T::zero(); layout.len];
        let mut rng = seeds::stream_rng(seed, seeds::INIT);
        let mut kaiming = |dst: &mut [T], fan_in: usize| {
            let std = libm::sqrt(2.0 / fan_in as f64);
            for v in dst {
                let n: f64 = StandardNormal.sample(&mut rng);
                *v = lit(std * n);
            }
        };
        if logit_init == LogitInit::Kaiming {
            let s = layout.arch.scale;
            kaiming(&mut values[layout.psf.clone()], s * s);
            kaiming(&mut values[layout.srf.clone()], layout.arch.hsi_bands);
        }
        let convs: Vec<Conv> = layout.convs().cloned().collect();
        for conv in &convs {
            kaiming(&mut values[conv.weight..conv.weight + conv.weight_len()], conv.fan_in());
        }
        let norms: Vec<InstanceNorm> = layout.norms().cloned().collect();
        for norm in &norms {
            values[norm.scale..norm.scale + norm.channels].iter_mut().for_each(|v| *v = T::one());
        }
        Ok(Self { layout, values, frozen_degradation: false })
    }

    pub fn from_values(layout: ModelLayout, values: Vec<T>, frozen_degradation: bool) -> Result<Self> {
        if values.len() != layout.len {
            return Err(shape_err!("{} parameter values for a layout of {}", values.len(), layout.len));
        }
        Ok(Self { layout, values, frozen_degradation })
    }

    pub fn layout(&self) -> &ModelLayout {
        &self.layout
    }

    pub fn arch(&self) -> &Architecture {
        &self.layout.arch
    }

    pub fn psf_logits(&self) -> PsfLogits<T> {
        PsfLogits { scale: self.arch().scale, logits: self.values[self.layout.psf.clone()].to_vec() }
    }

    pub fn srf_logits(&self) -> SrfLogits<T> {
        SrfLogits {
            msi_bands: self.arch().msi_bands,
            hsi_bands: self.arch().hsi_bands,
            logits: self.values[self.layout.srf.clone()].to_vec(),
        }
    }

    pub fn psf_kernel(&self) -> PsfKernel {
        psf_kernel(&self.psf_logits()).expect("layout sizes the logits")
    }

    pub fn srf_matrix(&self) -> SrfMatrix {
        srf_matrix(&self.srf_logits()).expect("layout sizes the logits")
    }

    /// Installs known degradation operators as `ln(max(w, 1e-12))` logits
    /// and optionally freezes them.
    pub fn set_degradation(&mut self, k: &PsfKernel, r: &SrfMatrix, freeze: bool) -> Result<()> {
        let arch = self.arch();
        if k.scale() != arch.scale {
            return Err(shape_err!("kernel scale {} for model scale {}", k.scale(), arch.scale));
        }
        if r.msi_bands() != arch.msi_bands || r.hsi_bands() != arch.hsi_bands {
            return Err(shape_err!(
                "SRF {}x{} for model {}x{}",
                r.msi_bands(),
                r.hsi_bands(),
                arch.msi_bands,
                arch.hsi_bands
            ));
        }
        let log = |w: &f64| lit::<T>(libm::log(w.max(LOGIT_FLOOR)));
        let psf = self.layout.psf.clone();
        let srf = self.layout.srf.clone();
        for (dst, w) in self.values[psf].iter_mut().zip(k.weights()) {
            *dst = log(w);
        }
        for (dst, w) in self.values[srf].iter_mut().zip(r.weights()) {
            *dst = log(w);
        }
        self.frozen_degradation = freeze;
        Ok(())
    }

    pub fn zero_grads(&self) -> Vec<T> {
        vec![T::zero(); self.layout.len]
    }

    // ---- F_y -------------------------------------------------------------

    pub fn fy_forward(&self, x: &Tensor<T>) -> Result<FyCache<T>> {
        let kernel = softmax(&self.values[self.layout.psf.clone()]);
        let out = blur_decimate(x, &kernel, self.arch().scale)?;
        Ok(FyCache { input: x.clone(), kernel, out })
    }

    pub fn fy_backward(&self, cache: &FyCache<T>, grad_out: &Tensor<T>, grads: &mut [T]) -> Tensor<T> {
        let (dx, dk) = blur_decimate_backward(&cache.input, &cache.kernel, self.arch().scale, grad_out);
        if !self.frozen_degradation {
            let dl = softmax_backward(&cache.kernel, &dk);
            for (g, d) in grads[self.layout.psf.clone()].iter_mut().zip(dl) {
                *g += d;
            }
        }
        dx
    }

    pub fn forward_fy(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.fy_forward(x)?.out)
    }

    // ---- F_z -------------------------------------------------------------

    pub fn fz_forward(&self, x: &Tensor<T>) -> Result<FzCache<T>> {
        let arch = self.arch();
        if x.channels != arch.hsi_bands {
            return Err(shape_err!("F_z expects {} bands, got {}", arch.hsi_bands, x.channels));
        }
        let srf = row_softmax(&self.values[self.layout.srf.clone()], arch.hsi_bands);
        let out = band_mix(x, &srf, arch.msi_bands)?;
        Ok(FzCache { input: x.clone(), srf, out })
    }

    pub fn fz_backward(&self, cache: &FzCache<T>, grad_out: &Tensor<T>, grads: &mut [T]) -> Tensor<T> {
        let arch = self.arch();
        let (dx, dr) = band_mix_backward(&cache.input, &cache.srf, arch.msi_bands, grad_out);
        if !self.frozen_degradation {
            let big_l = arch.hsi_bands;
            let dst = &mut grads[self.layout.srf.clone()];
            for ((p, d), g) in cache.srf.chunks(big_l).zip(dr.chunks(big_l)).zip(dst.chunks_mut(big_l)) {
                for (gi, v) in g.iter_mut().zip(softmax_backward(p, d)) {
                    *gi += v;
                }
            }
        }
        dx
    }

    pub fn forward_fz(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.fz_forward(x)?.out)
    }

    // ---- shared conv → IN → ReLU step ------------------------------------

    fn step_forward(&self, cn: &ConvNorm, x: &Tensor<T>) -> StepCache<T> {
        let (c, conv) = cn.conv.forward(&self.values, x);
        let (mut out, norm) = cn.norm.forward(&self.values, c);
        relu(&mut out);
        StepCache { conv, norm, out }
    }

    fn step_backward(&self, cn: &ConvNorm, cache: &StepCache<T>, mut grad: Tensor<T>, grads: &mut [T]) -> Tensor<T> {
        relu_backward(&cache.out, &mut grad);
        let grad = cn.norm.backward(&self.values, &cache.norm, grad, grads);
        cn.conv.backward(&self.values, &cache.conv, &grad, grads)
    }

    // ---- G_y -------------------------------------------------------------

    pub fn gy_forward(&self, y: &Tensor<T>) -> Result<GyCache<T>> {
        let arch = self.arch();
        if y.channels != arch.hsi_bands {
            return Err(shape_err!("G_y expects {} bands, got {}", arch.hsi_bands, y.channels));
        }
        let mut ups = Vec::with_capacity(self.layout.spa_blocks.len());
        let mut blocks: Vec<StepCache<T>> = Vec::with_capacity(self.layout.spa_blocks.len());
        for cn in &self.layout.spa_blocks {
            let input = blocks.last().map_or(y, |b| &b.out);
            let up = BicubicUpsampler::new(input.rows, input.cols, 2);
            let upsampled = up.forward(input);
            blocks.push(self.step_forward(cn, &upsampled));
            ups.push(up);
        }
        let refine = self.step_forward(&self.layout.spa_refine, blocks.last().map_or(y, |b| &b.out));
        let (mut out, head) = self.layout.spa_head.forward(&self.values, &refine.out);
        sigmoid(&mut out);
        Ok(GyCache { ups, blocks, refine, head, out })
    }

    pub fn gy_backward(&self, cache: &GyCache<T>, grad_out: &Tensor<T>, grads: &mut [T]) -> Tensor<T> {
        let mut g = grad_out.clone();
        sigmoid_backward(&cache.out, &mut g);
        let g = self.layout.spa_head.backward(&self.values, &cache.head, &g, grads);
        let mut g = self.step_backward(&self.layout.spa_refine, &cache.refine, g, grads);
        for ((cn, step), up) in self.layout.spa_blocks.iter().zip(&cache.blocks).zip(&cache.ups).rev() {
            let gu = self.step_backward(cn, step, g, grads);
            g = up.backward(&gu);
        }
        g
    }

    pub fn forward_gy(&self, y: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.gy_forward(y)?.out)
    }

    // ---- G_z -------------------------------------------------------------

    pub fn gz_forward(&self, z: &Tensor<T>) -> Result<GzCache<T>> {
        let arch = self.arch();
        if z.channels != arch.msi_bands {
            return Err(shape_err!("G_z expects {} bands, got {}", arch.msi_bands, z.channels));
        }
        let mut hidden: Vec<StepCache<T>> = Vec::with_capacity(self.layout.spe_hidden.len());
        for cn in &self.layout.spe_hidden {
            let input = hidden.last().map_or(z, |h| &h.out);
            let step = self.step_forward(cn, input);
            hidden.push(step);
        }
        let (mut out, head) = self.layout.spe_head.forward(&self.values, hidden.last().map_or(z, |h| &h.out));
        sigmoid(&mut out);
        Ok(GzCache { hidden, head, out })
    }

    pub fn gz_backward(&self, cache: &GzCache<T>, grad_out: &Tensor<T>, grads: &mut [T]) -> Tensor<T> {
        let mut g = grad_out.clone();
        sigmoid_backward(&cache.out, &mut g);
        let mut g = self.layout.spe_head.backward(&self.values, &cache.head, &g, grads);
        for (cn, step) in self.layout.spe_hidden.iter().zip(&cache.hidden).rev() {
            g = self.step_backward(cn, step, g, grads);
        }
        g
    }

    pub fn forward_gz(&self, z: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.gz_forward(z)?.out)
    }

    /// Mean of the two super-resolved branches.
    pub fn fuse(&self, y: &Tensor<T>, z: &Tensor<T>) -> Result<Tensor<T>> {
        let a = self.forward_gy(y)?;
        let b = self.forward_gz(z)?;
        a.average(&b)
            .map_err(|_| shape_err!("branch outputs disagree: G_y {:?} vs G_z {:?}", a.shape(), b.shape()))
    }

    /// Same parameters in another precision.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            layout: self.layout.clone(),
            values: self.values.iter().map(|v| U::from_f64_lossy(v.to_f64().unwrap_or(f64::NAN))).collect(),
            frozen_degradation: self.frozen_degradation,
        }
    }
}
