//! Progressive per-image colorization.
//!
//! A pyramid of small conditional generators is trained coarse-to-fine on
//! one image. The coarsest generator maps the downsampled grayscale to
//! color; every finer generator additionally sees the upsampled output of
//! the level below, so global color layout is settled early and refined
//! locally. Each level minimizes an L1 reconstruction loss restricted to
//! the known (unmasked) pixels, then is frozen before the next level
//! starts. Applied to a masked image, the learned gray-to-color mapping
//! extends into the hole.

use crate::error::{Error, Result};
use crate::nn::{
    adam_step, AdamState, LayerSpec, Mode, Network, Tensor, TrainHyper, LEAKY_SLOPE,
};
use crate::raster::{reattach_luminance, GrayImage, Mask, PyramidSet, RgbImage};

/// Feature width of every generator.
pub const FEATURE_CHANNELS: usize = 32;
/// Residual blocks per generator (each holds two 3x3 convs).
pub const RESIDUAL_BLOCKS: usize = 9;
/// Downsampling factor between pyramid levels.
pub const PYRAMID_FACTOR: usize = 2;

/// Layer stack of one generator: input conv + norm + activation, the
/// residual trunk, and a 1x1 projection to RGB. The coarsest generator
/// takes 1 input channel (gray); finer ones take 4 (gray + upsampled RGB).
pub fn generator_layers(input_channels: usize) -> Vec<LayerSpec> {
    let mut spec = vec![
        LayerSpec::Conv3x3 { in_ch: input_channels, out_ch: FEATURE_CHANNELS },
        LayerSpec::BatchNorm { channels: FEATURE_CHANNELS },
        LayerSpec::LeakyRelu { negative_slope: LEAKY_SLOPE },
    ];
    for _ in 0..RESIDUAL_BLOCKS {
        spec.push(LayerSpec::Residual { channels: FEATURE_CHANNELS });
    }
    spec.push(LayerSpec::Conv1x1 { in_ch: FEATURE_CHANNELS, out_ch: 3 });
    spec
}

/// Trainable parameter count of [`generator_layers`], computed from layer
/// shapes.
pub fn generator_param_count(input_channels: usize) -> usize {
    let f = FEATURE_CHANNELS;
    let conv3 = |cin: usize, cout: usize| cout * cin * 9 + cout;
    let bn = 2 * f;
    let block = 2 * (conv3(f, f) + bn);
    conv3(input_channels, f) + bn + RESIDUAL_BLOCKS * block + (3 * f + 3)
}

/// Iterations and learning rate for one pyramid level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSchedule {
    pub iterations: usize,
    pub learning_rate: f64,
}

/// Level schedules for a pyramid of the given height, coarsest first.
/// The finest two levels run 1000 iterations at rates 0.003 and 0.005;
/// any coarser level runs 500 iterations at 0.01.
pub fn default_schedules(height: usize) -> Vec<LevelSchedule> {
    (0..height)
        .map(|n| {
            let from_finest = height - 1 - n;
            match from_finest {
                0 => LevelSchedule { iterations: 1000, learning_rate: 0.003 },
                1 => LevelSchedule { iterations: 1000, learning_rate: 0.005 },
                _ => LevelSchedule { iterations: 500, learning_rate: 0.01 },
            }
        })
        .collect()
}

/// A user-supplied color constraint: treated as a known pixel. Hints only
/// take effect inside the missing region; elsewhere the ground truth is
/// already known and the hint is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct HintPoint {
    pub row: usize,
    pub col: usize,
    pub color: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct ColorizeConfig {
    pub pyramid_height: usize,
    /// One entry per level, coarsest first; length must equal
    /// `pyramid_height`.
    pub schedules: Vec<LevelSchedule>,
    pub seed: u64,
    /// Shift output channels so luminance matches the input gray exactly.
    pub reattach_luminance: bool,
    pub hints: Vec<HintPoint>,
}

impl Default for ColorizeConfig {
    fn default() -> Self {
        Self {
            pyramid_height: 3,
            schedules: default_schedules(3),
            seed: 0,
            reattach_luminance: false,
            hints: Vec::new(),
        }
    }
}

impl ColorizeConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pyramid_height < 1 {
            return Err(Error::invalid("pyramid height must be at least 1"));
        }
        if self.schedules.len() != self.pyramid_height {
            return Err(Error::invalid(format!(
                "schedule count {} does not match pyramid height {}",
                self.schedules.len(),
                self.pyramid_height
            )));
        }
        for (n, s) in self.schedules.iter().enumerate() {
            TrainHyper::new(s.learning_rate, s.iterations, self.seed)
                .validate()
                .map_err(|e| Error::invalid(format!("level {n} schedule: {e}")))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ColorizeResult {
    /// Finest-level output.
    pub output: RgbImage,
    /// Outputs of every level, coarsest first.
    pub per_level_outputs: Vec<RgbImage>,
    /// Per-level, per-iteration loss values.
    pub loss_trace: Vec<Vec<f64>>,
    /// True if any level trained with no unmasked pixels at all.
    pub empty_loss_warning: bool,
}

/// Mean absolute difference over unmasked pixel-channels. Returns the loss
/// and a warning flag that is set when every pixel is masked (the loss is
/// then 0 by convention).
pub fn masked_l1_loss<T: crate::nn::Real>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
    mask: &Mask,
) -> Result<(f64, bool)> {
    let (loss, _, warned) = masked_l1_with_grad(pred, target, mask, false)?;
    Ok((loss, warned))
}

fn masked_l1_with_grad<T: crate::nn::Real>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
    mask: &Mask,
    want_grad: bool,
) -> Result<(f64, Option<Tensor<T>>, bool)> {
    if pred.shape() != target.shape() {
        return Err(Error::invalid("loss requires equal prediction and target shapes"));
    }
    if pred.channels() != 3 {
        return Err(Error::invalid("loss expects 3-channel tensors"));
    }
    if pred.height() != mask.height() || pred.width() != mask.width() {
        return Err(Error::invalid("loss mask dimensions must match the tensors"));
    }
    let p = pred.plane_len();
    let unmasked = p - mask.count_missing();
    if unmasked == 0 {
        let grad = want_grad.then(|| Tensor::zeros(3, pred.height(), pred.width()));
        return Ok((0.0, grad, true));
    }
    let count = (3 * unmasked) as f64;
    let scale = T::from_f64(1.0 / count);
    let mut sum = 0.0f64;
    let mut grad = want_grad.then(|| Tensor::zeros(3, pred.height(), pred.width()));
    for c in 0..3 {
        let pp = pred.plane(c);
        let tp = target.plane(c);
        let gp = grad.as_mut().map(|g| g.plane_mut(c));
        match gp {
            Some(gp) => {
                for (i, &m) in mask.data().iter().enumerate() {
                    if m == 0 {
                        let d = pp[i] - tp[i];
                        sum += d.abs().to_f64();
                        gp[i] = if d > T::ZERO {
                            scale
                        } else if d < T::ZERO {
                            -scale
                        } else {
                            T::ZERO
                        };
                    }
                }
            }
            None => {
                for (i, &m) in mask.data().iter().enumerate() {
                    if m == 0 {
                        sum += (pp[i] - tp[i]).abs().to_f64();
                    }
                }
            }
        }
    }
    Ok((sum / count, grad, false))
}

fn gray_tensor(g: &GrayImage) -> Tensor<f32> {
    Tensor::from_vec(1, g.height(), g.width(), g.data().iter().map(|&v| v as f32).collect())
        .expect("gray raster is well-formed")
}

fn rgb_tensor(img: &RgbImage) -> Tensor<f32> {
    let p = img.height() * img.width();
    let mut data = vec![0.0f32; 3 * p];
    for (i, px) in img.data().chunks_exact(3).enumerate() {
        data[i] = px[0] as f32;
        data[p + i] = px[1] as f32;
        data[2 * p + i] = px[2] as f32;
    }
    Tensor::from_vec(3, img.height(), img.width(), data).expect("rgb raster is well-formed")
}

fn tensor_to_rgb_clamped(t: &Tensor<f32>) -> RgbImage {
    let p = t.plane_len();
    let mut data = vec![0.0f64; 3 * p];
    for c in 0..3 {
        let plane = t.plane(c);
        for (i, &v) in plane.iter().enumerate() {
            data[i * 3 + c] = f64::from(v).clamp(0.0, 1.0);
        }
    }
    RgbImage::new(t.height(), t.width(), data).expect("clamped values are in range")
}

fn level_input(gray: &GrayImage, prev: Option<&RgbImage>) -> Result<Tensor<f32>> {
    let g = gray_tensor(gray);
    match prev {
        None => Ok(g),
        Some(prev) => {
            if prev.height() != gray.height() || prev.width() != gray.width() {
                return Err(Error::invalid(
                    "conditioning image must already be upsampled to the level resolution",
                ));
            }
            g.concat_channels(&rgb_tensor(prev))
        }
    }
}

/// Evaluate a trained generator on one level: gray only for the coarsest
/// level, gray concatenated with the upsampled lower-level output
/// otherwise. Output is clamped to `[0, 1]`.
pub fn level_forward(
    generator: &mut Network<f32>,
    gray: &GrayImage,
    prev: Option<&RgbImage>,
) -> Result<RgbImage> {
    let input = level_input(gray, prev)?;
    let out = generator.forward(&input, Mode::Eval)?;
    Ok(tensor_to_rgb_clamped(&out))
}

/// One trained pyramid level.
pub struct TrainedLevel {
    pub generator: Network<f32>,
    pub output: RgbImage,
    pub loss_trace: Vec<f64>,
    pub empty_loss_warning: bool,
}

/// Train the generator for pyramid level `n` against the masked
/// reconstruction loss. Lower levels are untouched: their only influence is
/// the frozen `prev_output` (already bilinearly upsampled to this level's
/// resolution by the caller).
pub fn train_level(
    n: usize,
    pyramids: &PyramidSet,
    prev_output: Option<&RgbImage>,
    schedule: &LevelSchedule,
    seed: u64,
) -> Result<TrainedLevel> {
    if n >= pyramids.height() {
        return Err(Error::invalid(format!(
            "level {n} out of range for pyramid of height {}",
            pyramids.height()
        )));
    }
    if (n == 0) != prev_output.is_none() {
        return Err(Error::invalid(
            "the coarsest level takes no conditioning image; finer levels require one",
        ));
    }
    crate::tune_allocator();
    let level = pyramids.level(n);
    let hyper = TrainHyper::new(schedule.learning_rate, schedule.iterations, seed);
    hyper.validate()?;

    let input = level_input(&level.gray, prev_output)?;
    let target = rgb_tensor(&level.color);
    let in_ch = if n == 0 { 1 } else { 4 };
    let mut rng = crate::rng::stream(seed, &format!("level/{n}"));
    let mut generator = Network::<f32>::from_spec(&generator_layers(in_ch), &mut rng)?;
    let mut state = AdamState::for_network(&mut generator);

    let mut trace = Vec::with_capacity(schedule.iterations);
    let mut warned = false;
    for iteration in 0..schedule.iterations {
        let pred = generator.forward(&input, Mode::Train)?;
        let (loss, grad, empty) = masked_l1_with_grad(&pred, &target, &level.mask, true)?;
        if !loss.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite loss at level {n}, iteration {iteration}"
            )));
        }
        warned |= empty;
        trace.push(loss);
        generator.backward(&grad.expect("gradient requested"))?;
        adam_step(&mut generator, &mut state, &hyper).map_err(|e| {
            Error::numeric(format!("level {n}, iteration {iteration}: {e}"))
        })?;
        generator.zero_grads();
    }

    let output = level_forward(&mut generator, &level.gray, prev_output)?;
    Ok(TrainedLevel { generator, output, loss_trace: trace, empty_loss_warning: warned })
}

/// Apply hints: each hint inside the missing region becomes a known pixel
/// (mask cleared, color written) before the pyramids are built.
fn apply_hints(color: &RgbImage, mask: &Mask, hints: &[HintPoint]) -> Result<(RgbImage, Mask)> {
    let mut color = color.clone();
    let mut mask = mask.clone();
    for hint in hints {
        if hint.row >= color.height() || hint.col >= color.width() {
            return Err(Error::invalid(format!(
                "hint at ({}, {}) lies outside the {}x{} image",
                hint.row,
                hint.col,
                color.height(),
                color.width()
            )));
        }
        if hint.color.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!(
                "hint color {:?} has components outside [0, 1]",
                hint.color
            )));
        }
        if mask.is_missing(hint.row, hint.col) {
            color.set_pixel(hint.row, hint.col, hint.color);
            mask.set(hint.row, hint.col, false);
        }
    }
    Ok((color, mask))
}

fn check_inputs(gray: &GrayImage, known_color: &RgbImage, mask: &Mask) -> Result<()> {
    if gray.height() != known_color.height()
        || gray.width() != known_color.width()
        || gray.height() != mask.height()
        || gray.width() != mask.width()
    {
        return Err(Error::invalid("gray, color, and mask dimensions must match"));
    }
    Ok(())
}

/// Colorize a completed grayscale image, training the full generator
/// pyramid coarse-to-fine. `known_color` is trusted only where `mask` is 0.
pub fn colorize(
    gray: &GrayImage,
    known_color: &RgbImage,
    mask: &Mask,
    cfg: &ColorizeConfig,
) -> Result<ColorizeResult> {
    check_inputs(gray, known_color, mask)?;
    cfg.validate()?;
    let (color, mask) = apply_hints(known_color, mask, &cfg.hints)?;
    let pyramids = PyramidSet::from_parts(
        gray.clone(),
        color,
        mask,
        cfg.pyramid_height,
        PYRAMID_FACTOR,
    )?;

    let mut per_level: Vec<RgbImage> = Vec::with_capacity(cfg.pyramid_height);
    let mut traces = Vec::with_capacity(cfg.pyramid_height);
    let mut warned = false;
    let mut prev: Option<RgbImage> = None;
    for n in 0..cfg.pyramid_height {
        let level = pyramids.level(n);
        let prev_up = match &prev {
            None => None,
            Some(out) => Some(out.bilinear_upsample(level.gray.height(), level.gray.width())?),
        };
        let trained = train_level(n, &pyramids, prev_up.as_ref(), &cfg.schedules[n], cfg.seed)?;
        warned |= trained.empty_loss_warning;
        traces.push(trained.loss_trace);
        per_level.push(trained.output.clone());
        prev = Some(trained.output);
    }

    let mut output = per_level.last().expect("at least one level").clone();
    if cfg.reattach_luminance {
        output = reattach_luminance(&output, gray)?;
    }
    Ok(ColorizeResult {
        output,
        per_level_outputs: per_level,
        loss_trace: traces,
        empty_loss_warning: warned,
    })
}

/// Ablation without the progressive design: a single gray-only generator at
/// full resolution, trained with the finest-level schedule.
pub fn colorize_base(
    gray: &GrayImage,
    known_color: &RgbImage,
    mask: &Mask,
    cfg: &ColorizeConfig,
) -> Result<ColorizeResult> {
    check_inputs(gray, known_color, mask)?;
    cfg.validate()?;
    let (color, mask) = apply_hints(known_color, mask, &cfg.hints)?;
    let pyramids = PyramidSet::from_parts(gray.clone(), color, mask, 1, PYRAMID_FACTOR)?;
    let schedule = cfg.schedules.last().expect("validated non-empty");
    let trained = train_level(0, &pyramids, None, schedule, cfg.seed)?;

    let mut output = trained.output.clone();
    if cfg.reattach_luminance {
        output = reattach_luminance(&output, gray)?;
    }
    Ok(ColorizeResult {
        output,
        per_level_outputs: vec![trained.output],
        loss_trace: vec![trained.loss_trace],
        empty_loss_warning: trained.empty_loss_warning,
    })
}

/// Parse a hints file: one `row col R G B` line per hint, colors as
/// decimals in `[0, 1]`. Blank lines and lines starting with `#` are
/// skipped.
pub fn parse_hints(text: &str) -> Result<Vec<HintPoint>> {
    let mut hints = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::invalid(format!(
                "hint line {}: expected `row col R G B`, got {line:?}",
                lineno + 1
            )));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| {
                Error::invalid(format!("hint line {}: bad {what} {s:?}", lineno + 1))
            })
        };
        let row = parse(fields[0], "row")? as usize;
        let col = parse(fields[1], "col")? as usize;
        let color = [
            parse(fields[2], "red")?,
            parse(fields[3], "green")?,
            parse(fields[4], "blue")?,
        ];
        hints.push(HintPoint { row, col, color });
    }
    Ok(hints)
}

/// Write loss traces as `level,iteration,loss` CSV.
pub fn write_loss_trace_csv(path: impl AsRef<std::path::Path>, traces: &[Vec<f64>]) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let mut out = String::from("level,iteration,loss\n");
    for (level, trace) in traces.iter().enumerate() {
        for (iteration, loss) in trace.iter().enumerate() {
            out.push_str(&format!("{level},{iteration},{loss:.8}\n"));
        }
    }
    let mut f = std::fs::File::create(path)
        .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    f.write_all(out.as_bytes())
        .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maskgen;

    fn demo_gray(size: usize) -> GrayImage {
        let data: Vec<f64> = (0..size * size)
            .map(|i| {
                let (r, c) = (i / size, i % size);
                (((r as f64 * 0.37).sin() + (c as f64 * 0.23).cos()) * 0.25 + 0.5).clamp(0.0, 1.0)
            })
            .collect();
        GrayImage::new(size, size, data).unwrap()
    }

    fn demo_color(size: usize) -> RgbImage {
        let g = demo_gray(size);
        let data: Vec<f64> = g
            .data()
            .iter()
            .map(|&v| [v, (v * 0.8 + 0.1).clamp(0.0, 1.0), (1.0 - v).clamp(0.0, 1.0)])
            .flatten()
            .collect();
        RgbImage::new(size, size, data).unwrap()
    }

    #[test]
    fn generator_shape_and_param_count() {
        for in_ch in [1usize, 4] {
            let spec = generator_layers(in_ch);
            assert_eq!(spec.len(), 1 + 1 + 1 + RESIDUAL_BLOCKS + 1);
            assert_eq!(spec[0], LayerSpec::Conv3x3 { in_ch, out_ch: 32 });
            assert_eq!(*spec.last().unwrap(), LayerSpec::Conv1x1 { in_ch: 32, out_ch: 3 });
            let mut rng = crate::rng::stream(0, "count");
            let mut net = Network::<f32>::from_spec(&spec, &mut rng).unwrap();
            assert_eq!(net.param_count(), generator_param_count(in_ch));
        }
    }

    #[test]
    fn masked_l1_examples() {
        let pred = Tensor::from_vec(3, 1, 1, vec![0.5f64, 0.5, 0.5]).unwrap();
        let target = Tensor::from_vec(3, 1, 1, vec![0.0, 1.0, 0.0]).unwrap();
        let open = Mask::empty(1, 1).unwrap();
        let (loss, warned) = masked_l1_loss(&pred, &target, &open).unwrap();
        assert!((loss - 0.5).abs() < 1e-12);
        assert!(!warned);

        let (zero, _) = masked_l1_loss(&pred, &pred, &open).unwrap();
        assert_eq!(zero, 0.0);

        let closed = Mask::new(1, 1, vec![1]).unwrap();
        let (loss, warned) = masked_l1_loss(&pred, &target, &closed).unwrap();
        assert_eq!(loss, 0.0);
        assert!(warned);
    }

    #[test]
    fn default_schedules_match_documented_values() {
        let s = default_schedules(3);
        assert_eq!(
            s,
            vec![
                LevelSchedule { iterations: 500, learning_rate: 0.01 },
                LevelSchedule { iterations: 1000, learning_rate: 0.005 },
                LevelSchedule { iterations: 1000, learning_rate: 0.003 },
            ]
        );
        assert_eq!(ColorizeConfig::default().schedules, s);
    }

    #[test]
    fn level_forward_channel_contract() {
        let gray = demo_gray(16);
        let prev = demo_color(16);
        let mut rng = crate::rng::stream(1, "chan");
        let mut g0 = Network::<f32>::from_spec(&generator_layers(1), &mut rng).unwrap();
        let mut g1 = Network::<f32>::from_spec(&generator_layers(4), &mut rng).unwrap();

        let out = level_forward(&mut g0, &gray, None).unwrap();
        assert_eq!((out.height(), out.width()), (16, 16));
        let out = level_forward(&mut g1, &gray, Some(&prev)).unwrap();
        assert_eq!((out.height(), out.width()), (16, 16));

        // Wrong pairings are channel mismatches.
        assert!(level_forward(&mut g0, &gray, Some(&prev)).is_err());
        assert!(level_forward(&mut g1, &gray, None).is_err());
    }

    #[test]
    fn zeroed_output_conv_gives_zero_image() {
        let gray = demo_gray(12);
        let mut rng = crate::rng::stream(2, "zero");
        let mut g = Network::<f32>::from_spec(&generator_layers(1), &mut rng).unwrap();
        g.visit_params(|p| {
            if p.name.contains("conv1x1") {
                p.data.fill(0.0);
            }
        });
        let out = level_forward(&mut g, &gray, None).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_iteration_records_single_loss() {
        let gray = demo_gray(16);
        let color = demo_color(16);
        let mask = Mask::empty(16, 16).unwrap();
        let pyr = PyramidSet::from_parts(gray, color, mask, 1, 2).unwrap();
        let schedule = LevelSchedule { iterations: 1, learning_rate: 0.01 };
        let trained = train_level(0, &pyr, None, &schedule, 7).unwrap();
        assert_eq!(trained.loss_trace.len(), 1);
    }

    #[test]
    fn training_reduces_loss_median_of_three_seeds() {
        let gray = demo_gray(32);
        let color = demo_color(32);
        let mask = maskgen::rectangle_mask(32, 32, 8, 8, 16, 16).unwrap();
        let pyr = PyramidSet::from_parts(gray, color, mask, 1, 2).unwrap();
        let schedule = LevelSchedule { iterations: 40, learning_rate: 0.01 };
        let mut improved = 0;
        for seed in [1u64, 2, 3] {
            let trained = train_level(0, &pyr, None, &schedule, seed).unwrap();
            if trained.loss_trace.last().unwrap() < trained.loss_trace.first().unwrap() {
                improved += 1;
            }
        }
        assert!(improved >= 2, "loss decreased for only {improved}/3 seeds");
    }

    #[test]
    fn lower_levels_are_untouched_by_later_training() {
        let gray = demo_gray(32);
        let color = demo_color(32);
        let mask = Mask::empty(32, 32).unwrap();
        let pyr = PyramidSet::from_parts(gray, color, mask, 2, 2).unwrap();
        let s = LevelSchedule { iterations: 2, learning_rate: 0.01 };

        let mut level0 = train_level(0, &pyr, None, &s, 5).unwrap();
        let snapshot = level0.generator.param_snapshot();
        let up = level0
            .output
            .bilinear_upsample(pyr.level(1).gray.height(), pyr.level(1).gray.width())
            .unwrap();
        let _level1 = train_level(1, &pyr, Some(&up), &s, 5).unwrap();
        assert_eq!(level0.generator.param_snapshot(), snapshot);
    }

    #[test]
    fn masked_targets_cannot_influence_training() {
        // Scrambling the target colors inside the hole changes nothing:
        // neither the losses nor the outputs.
        let gray = demo_gray(32);
        let color = demo_color(32);
        let mask = maskgen::rectangle_mask(32, 32, 10, 10, 12, 12).unwrap();
        let mut scrambled = color.clone();
        for row in 10..22 {
            for col in 10..22 {
                scrambled.set_pixel(row, col, [1.0, 0.0, 1.0]);
            }
        }
        let cfg = ColorizeConfig {
            pyramid_height: 2,
            schedules: vec![
                LevelSchedule { iterations: 8, learning_rate: 0.01 },
                LevelSchedule { iterations: 8, learning_rate: 0.005 },
            ],
            seed: 11,
            ..Default::default()
        };
        let a = colorize(&gray, &color, &mask, &cfg).unwrap();
        let b = colorize(&gray, &scrambled, &mask, &cfg).unwrap();
        assert_eq!(a.loss_trace, b.loss_trace);
        assert_eq!(a.output, b.output);
    }

    #[test]
    fn colorize_is_deterministic_and_shaped() {
        let gray = demo_gray(32);
        let color = demo_color(32);
        let mask = maskgen::rectangle_mask(32, 32, 8, 8, 12, 12).unwrap();
        let cfg = ColorizeConfig {
            pyramid_height: 2,
            schedules: vec![
                LevelSchedule { iterations: 5, learning_rate: 0.01 },
                LevelSchedule { iterations: 5, learning_rate: 0.005 },
            ],
            seed: 3,
            ..Default::default()
        };
        let a = colorize(&gray, &color, &mask, &cfg).unwrap();
        let b = colorize(&gray, &color, &mask, &cfg).unwrap();
        assert_eq!(a.output, b.output);
        assert_eq!(a.per_level_outputs.len(), 2);
        assert_eq!((a.output.height(), a.output.width()), (32, 32));
        assert_eq!(a.per_level_outputs[0].height(), 16);
        assert_eq!(a.loss_trace[0].len(), 5);

        let c = colorize(
            &gray,
            &color,
            &mask,
            &ColorizeConfig { seed: 4, ..cfg.clone() },
        )
        .unwrap();
        assert_ne!(a.output, c.output);
    }

    #[test]
    fn base_has_single_level() {
        let gray = demo_gray(24);
        let color = demo_color(24);
        let mask = maskgen::rectangle_mask(24, 24, 6, 6, 8, 8).unwrap();
        let cfg = ColorizeConfig {
            pyramid_height: 2,
            schedules: vec![
                LevelSchedule { iterations: 99, learning_rate: 0.01 },
                LevelSchedule { iterations: 4, learning_rate: 0.003 },
            ],
            seed: 9,
            ..Default::default()
        };
        let out = colorize_base(&gray, &color, &mask, &cfg).unwrap();
        assert_eq!(out.per_level_outputs.len(), 1);
        // Base trains with the finest-level schedule only.
        assert_eq!(out.loss_trace[0].len(), 4);
        let again = colorize_base(&gray, &color, &mask, &cfg).unwrap();
        assert_eq!(out.output, again.output);
    }

    #[test]
    fn hints_clear_finest_mask_and_write_color() {
        let color = demo_color(16);
        let mask = maskgen::rectangle_mask(16, 16, 4, 4, 8, 8).unwrap();
        let hints = vec![
            HintPoint { row: 6, col: 6, color: [0.9, 0.1, 0.2] },  // inside hole
            HintPoint { row: 0, col: 0, color: [0.5, 0.5, 0.5] },  // outside: ignored
        ];
        let (color2, mask2) = apply_hints(&color, &mask, &hints).unwrap();
        assert!(!mask2.is_missing(6, 6));
        assert_eq!(color2.pixel(6, 6), [0.9, 0.1, 0.2]);
        assert!(!mask2.is_missing(0, 0));
        assert_eq!(color2.pixel(0, 0), color.pixel(0, 0));

        // Coarser levels may stay masked under max-pooling.
        let pyr = PyramidSet::from_parts(color2.to_monochrome(), color2, mask2, 2, 2).unwrap();
        assert!(!pyr.level(1).mask.is_missing(6, 6));
        assert!(pyr.level(0).mask.is_missing(3, 3));
    }

    #[test]
    fn hint_validation() {
        let color = demo_color(16);
        let mask = Mask::empty(16, 16).unwrap();
        let out_of_bounds = vec![HintPoint { row: 99, col: 0, color: [0.1; 3] }];
        assert!(apply_hints(&color, &mask, &out_of_bounds).is_err());
        let bad_color = vec![HintPoint { row: 0, col: 0, color: [1.5, 0.0, 0.0] }];
        assert!(apply_hints(&color, &mask, &bad_color).is_err());
    }

    #[test]
    fn parse_hints_roundtrip_and_errors() {
        let text = "# comment\n3 5 0.1 0.2 0.3\n\n10 11 1 0 0.5\n";
        let hints = parse_hints(text).unwrap();
        assert_eq!(
            hints,
            vec![
                HintPoint { row: 3, col: 5, color: [0.1, 0.2, 0.3] },
                HintPoint { row: 10, col: 11, color: [1.0, 0.0, 0.5] },
            ]
        );
        assert!(parse_hints("1 2 3\n").is_err());
        assert!(parse_hints("a b 0.1 0.2 0.3\n").is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ColorizeConfig::default();
        cfg.pyramid_height = 2;
        assert!(cfg.validate().is_err()); // schedule length mismatch
        cfg.schedules = default_schedules(2);
        assert!(cfg.validate().is_ok());
        cfg.schedules[0].learning_rate = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn loss_trace_csv_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_loss_trace_csv(&path, &[vec![0.5, 0.25], vec![0.125]]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "level,iteration,loss");
        assert_eq!(lines[1], "0,0,0.50000000");
        assert_eq!(lines[3], "1,0,0.12500000");
    }
}
