//! Two-phase optimization: PSF/SRF pretraining on the cross-degradation
//! loss, then joint training of all modules under the one-cycle schedule.
//! One iteration is one Adam step on the full (LrHSI, HrMSI) pair.

use alloc::vec::Vec;
use core::ops::Range;

use crate::cube::HsiCube;
use crate::degradation::{PsfKernel, SrfMatrix};
use crate::error::{shape_err, Error, Result};
use crate::losses::{loss_pretrain_grad, loss_total_grad};
use crate::model::{Architecture, LogitInit, ModelParams, ParamGroup};
use crate::optim::{Adam, AdamConfig};
use crate::scalar::Scalar;
use crate::schedule::OneCycle;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Estimate PSF and SRF from the data.
    #[default]
    Blind,
    /// PSF and SRF are known, injected and frozen.
    NonBlind,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Blind => "blind",
            Mode::NonBlind => "noblind",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub pretrain_iters: usize,
    pub pretrain_lr: f64,
    pub warmup_iters: usize,
    pub anneal_iters: usize,
    pub max_lr: f64,
    pub seed: u64,
    pub mode: Mode,
    pub use_cycle: bool,
    pub adam: AdamConfig,
    pub logit_init: LogitInit,
}

impl Default for TrainConfig {
    /// Full-scale settings: 10k pretraining steps at 1e-3, 10k warmup and
    /// 20k annealing steps peaking at 1e-2.
    fn default() -> Self {
        Self {
            pretrain_iters: 10_000,
            pretrain_lr: 1e-3,
            warmup_iters: 10_000,
            anneal_iters: 20_000,
            max_lr: 0.01,
            seed: 0,
            mode: Mode::Blind,
            use_cycle: true,
            adam: AdamConfig::default(),
            logit_init: LogitInit::Kaiming,
        }
    }
}

impl TrainConfig {
    /// Laptop-scale budget used by the test suite.
    pub fn desk_scale() -> Self {
        Self { pretrain_iters: 2_000, warmup_iters: 1_000, anneal_iters: 2_000, ..Self::default() }
    }

    pub fn schedule(&self) -> OneCycle {
        OneCycle { warmup_iters: self.warmup_iters, anneal_iters: self.anneal_iters, max_lr: self.max_lr }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.max_lr > 0.0 && self.max_lr.is_finite()) {
            return bad("max_lr must be positive");
        }
        if !(self.pretrain_lr > 0.0 && self.pretrain_lr.is_finite()) {
            return bad("pretrain_lr must be positive");
        }
        let open_unit = |b: f64| b > 0.0 && b < 1.0;
        if !open_unit(self.adam.beta1) || !open_unit(self.adam.beta2) {
            return bad("adam betas must lie in (0, 1)");
        }
        if !(self.adam.eps > 0.0) {
            return bad("adam eps must be positive");
        }
        Ok(())
    }
}

/// Rate used at training iteration `iter`.
pub fn lr_at(iter: usize, cfg: &TrainConfig) -> Result<f64> {
    cfg.schedule().lr_at(iter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pretrain,
    Train,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Pretrain => "pretrain",
            Phase::Train => "train",
        }
    }
}

/// Loss observed at the start of one iteration. Pretraining rows carry the
/// cross-degradation loss in `total` and zero components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRecord {
    pub phase: Phase,
    pub iter: usize,
    pub lr: f64,
    pub mm: f64,
    pub cyc: f64,
    pub ide: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<HistoryRecord>,
}

impl TrainHistory {
    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &HistoryRecord> {
        self.records.iter().filter(move |r| r.phase == phase)
    }

    pub fn extend(&mut self, other: TrainHistory) {
        self.records.extend(other.records);
    }

    /// Mean `total` of the first and last `window` records of a phase.
    pub fn smoothed_ends(&self, phase: Phase, window: usize) -> Option<(f64, f64)> {
        let totals: Vec<f64> = self.phase(phase).map(|r| r.total).collect();
        if totals.is_empty() || window == 0 {
            return None;
        }
        let w = window.min(totals.len());
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        Some((mean(&totals[..w]), mean(&totals[totals.len() - w..])))
    }
}

/// Observer invoked once per iteration, after the record is produced.
pub type Progress<'a> = &'a mut dyn FnMut(&HistoryRecord);

fn check_pair<T: Scalar>(m: &ModelParams<T>, y: &Tensor<T>, z: &Tensor<T>) -> Result<()> {
    let a = m.arch();
    if y.channels != a.hsi_bands || z.channels != a.msi_bands {
        return Err(shape_err!(
            "pair has {} and {} bands, model expects {} and {}",
            y.channels,
            z.channels,
            a.hsi_bands,
            a.msi_bands
        ));
    }
    if z.rows != y.rows * a.scale || z.cols != y.cols * a.scale {
        return Err(shape_err!(
            "HrMSI {}x{} is not {}x the LrHSI {}x{}",
            z.rows,
            z.cols,
            a.scale,
            y.rows,
            y.cols
        ));
    }
    Ok(())
}

fn degradation_ranges<T: Scalar>(m: &ModelParams<T>) -> Vec<Range<usize>> {
    [m.layout().psf_range(), m.layout().srf_range()].into()
}

fn trainable_ranges<T: Scalar>(m: &ModelParams<T>) -> Vec<Range<usize>> {
    let layout = m.layout();
    let mut r = Vec::new();
    if !m.frozen_degradation {
        r.extend(degradation_ranges(m));
    }
    r.extend(layout.group_ranges(ParamGroup::SpatialUp));
    r.extend(layout.group_ranges(ParamGroup::SpectralUp));
    r
}

fn divergence(phase: Phase, iter: usize, history: &TrainHistory) -> Error {
    Error::Divergence {
        phase: phase.as_str(),
        iter,
        last_finite: history.records.iter().rev().find(|r| r.total.is_finite()).map(|r| r.iter),
    }
}

/// Adam on the cross-degradation loss, PSF/SRF logits only, fixed rate.
pub fn pretrain<T: Scalar>(
    m: ModelParams<T>,
    y: &Tensor<T>,
    z: &Tensor<T>,
    cfg: &TrainConfig,
) -> Result<(ModelParams<T>, TrainHistory)> {
    pretrain_with(m, y, z, cfg, &mut |_| {})
}

pub fn pretrain_with<T: Scalar>(
    mut m: ModelParams<T>,
    y: &Tensor<T>,
    z: &Tensor<T>,
    cfg: &TrainConfig,
    progress: Progress<'_>,
) -> Result<(ModelParams<T>, TrainHistory)> {
    if cfg.mode == Mode::NonBlind {
        return Err(Error::Mode("noblind"));
    }
    cfg.validate()?;
    check_pair(&m, y, z)?;
    let ranges = degradation_ranges(&m);
    let mut adam = Adam::new(m.values.len(), cfg.adam);
    let mut history = TrainHistory::default();
    for iter in 0..cfg.pretrain_iters {
        let (loss, grads) = loss_pretrain_grad(&m, y, z)?;
        if !loss.is_finite() {
            return Err(divergence(Phase::Pretrain, iter, &history));
        }
        let rec = HistoryRecord {
            phase: Phase::Pretrain,
            iter,
            lr: cfg.pretrain_lr,
            mm: 0.0,
            cyc: 0.0,
            ide: 0.0,
            total: loss,
        };
        progress(&rec);
        history.records.push(rec);
        adam.step(&mut m.values, &grads, cfg.pretrain_lr, &ranges);
    }
    Ok((m, history))
}

/// Adam on the full objective under the one-cycle schedule. In non-blind
/// mode the degradation logits are frozen.
pub fn train<T: Scalar>(
    m: ModelParams<T>,
    y: &Tensor<T>,
    z: &Tensor<T>,
    cfg: &TrainConfig,
) -> Result<(ModelParams<T>, TrainHistory)> {
    train_with(m, y, z, cfg, &mut |_| {})
}

pub fn train_with<T: Scalar>(
    mut m: ModelParams<T>,
    y: &Tensor<T>,
    z: &Tensor<T>,
    cfg: &TrainConfig,
    progress: Progress<'_>,
) -> Result<(ModelParams<T>, TrainHistory)> {
    cfg.validate()?;
    check_pair(&m, y, z)?;
    if cfg.mode == Mode::NonBlind {
        m.frozen_degradation = true;
    }
    let ranges = trainable_ranges(&m);
    let schedule = cfg.schedule();
    let mut adam = Adam::new(m.values.len(), cfg.adam);
    let mut history = TrainHistory::default();
    for iter in 0..schedule.total_iters() {
        let lr = schedule.lr_at(iter)?;
        let (loss, grads) = loss_total_grad(&m, y, z, cfg.use_cycle)?;
        if !loss.is_finite() {
            return Err(divergence(Phase::Train, iter, &history));
        }
        let rec = HistoryRecord {
            phase: Phase::Train,
            iter,
            lr,
            mm: loss.mm,
            cyc: loss.cyc,
            ide: loss.ide,
            total: loss.total,
        };
        progress(&rec);
        history.records.push(rec);
        adam.step(&mut m.values, &grads, lr, &ranges);
    }
    Ok((m, history))
}

/// Result of a complete fusion run.
#[derive(Debug, Clone)]
pub struct FusionOutput {
    pub fused: HsiCube,
    pub history: TrainHistory,
    pub params: ModelParams<f32>,
}

/// Initialize, pretrain (blind mode only), train, then fuse.
pub fn run_fusion(
    y: &HsiCube,
    z: &HsiCube,
    cfg: &TrainConfig,
    arch: &Architecture,
    known: Option<(&PsfKernel, &SrfMatrix)>,
) -> Result<FusionOutput> {
    run_fusion_with(y, z, cfg, arch, known, &mut |_| {})
}

pub fn run_fusion_with(
    y: &HsiCube,
    z: &HsiCube,
    cfg: &TrainConfig,
    arch: &Architecture,
    known: Option<(&PsfKernel, &SrfMatrix)>,
    progress: Progress<'_>,
) -> Result<FusionOutput> {
    cfg.validate()?;
    let mut m = ModelParams::<f32>::init(arch.clone(), cfg.seed, cfg.logit_init)?;
    let yt: Tensor<f32> = y.to_tensor();
    let zt: Tensor<f32> = z.to_tensor();
    check_pair(&m, &yt, &zt)?;
    let mut history = TrainHistory::default();
    match cfg.mode {
        Mode::NonBlind => {
            let (k, r) = known.ok_or_else(|| Error::Config("noblind mode needs a known PSF and SRF".into()))?;
            m.set_degradation(k, r, true)?;
        }
        Mode::Blind => {
            let (pm, h) = pretrain_with(m, &yt, &zt, cfg, progress)?;
            m = pm;
            history.extend(h);
        }
    }
    let (m, h) = train_with(m, &yt, &zt, cfg, progress)?;
    history.extend(h);
    let fused = HsiCube::from_tensor(&m.fuse(&yt, &zt)?)?.with_name("fused");
    let fused = match y.wavelengths_nm() {
        Some(wl) => fused.with_wavelengths(wl.to_vec())?,
        None => fused,
    };
    Ok(FusionOutput { fused, history, params: m })
}
