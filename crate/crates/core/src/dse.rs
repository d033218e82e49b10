//! Greedy design-space exploration: quantization, then mapping design, cell
//! and ADC precision on ideal devices, then real devices.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{
    validate, AdcKind, Design, DeviceModel, OnOffRatio, QuantScheme, SimulationConfig,
};
use crate::hwperf::{build_chip, estimate_average, HardwareReport, HwError, Metrics};
use crate::netgraph::{fidelity, run_cim, run_reference, run_software, NetError, Network};
use crate::tensorio::ModelBundle;

#[derive(Debug, Error)]
pub enum DseError {
    #[error("invalid search space: {0}")]
    Space(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage {stage}: no candidate meets the fidelity tolerance")]
    Infeasible { stage: char },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Hw(#[from] HwError),
}

/// A device given by preset name or in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeviceChoice {
    Preset(String),
    Model(DeviceModel),
}

impl DeviceChoice {
    pub fn resolve(&self) -> Result<DeviceModel, DseError> {
        match self {
            DeviceChoice::Preset(name) => DeviceModel::preset(name)
                .ok_or_else(|| DseError::Space(format!("unknown device preset `{name}`"))),
            DeviceChoice::Model(m) => Ok(m.clone()),
        }
    }
}

fn default_tolerance() -> f64 {
    0.03
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_verify_seeds() -> Vec<u64> {
    vec![1001, 1002, 1003, 1004, 1005]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub schemes: Vec<QuantScheme>,
    /// Inclusive `[lo, hi]` for the tied weight/input precision.
    pub bits: [u32; 2],
    pub designs: Vec<Design>,
    pub cell_bits: Vec<u32>,
    /// Inclusive `[lo, hi]`.
    pub adc_precision: [u32; 2],
    pub devices: Vec<DeviceChoice>,
    /// Allowed fidelity drop.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Programming seeds averaged at points with cell variation.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Fresh seeds for re-checking the final selection.
    #[serde(default = "default_verify_seeds")]
    pub verify_seeds: Vec<u64>,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<(), DseError> {
        let bad = |m: &str| Err(DseError::Space(m.to_string()));
        if self.schemes.is_empty() || self.designs.is_empty() || self.cell_bits.is_empty() {
            return bad("schemes, designs and cell_bits must be non-empty");
        }
        if self.devices.is_empty() || self.seeds.is_empty() || self.verify_seeds.is_empty() {
            return bad("devices and seed lists must be non-empty");
        }
        if self.bits[0] < 2 || self.bits[0] > self.bits[1] || self.bits[1] > 16 {
            return bad("bits must satisfy 2 <= lo <= hi <= 16");
        }
        if self.adc_precision[0] < 1 || self.adc_precision[0] > self.adc_precision[1] || self.adc_precision[1] > 16 {
            return bad("adc_precision must satisfy 1 <= lo <= hi <= 16");
        }
        if self.cell_bits.iter().any(|&k| !(1..=8).contains(&k)) {
            return bad("cell_bits must lie in 1..=8");
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return bad("tolerance must lie in (0, 1)");
        }
        for d in &self.devices {
            d.resolve()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, DseError> {
        let s: SearchSpace = serde_json::from_str(text).map_err(|e| DseError::Space(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Only `cfg` itself.
    pub fn singleton(cfg: &SimulationConfig) -> Self {
        SearchSpace {
            schemes: vec![cfg.quant.scheme],
            bits: [cfg.quant.weight_bits; 2],
            designs: vec![cfg.mapping.design],
            cell_bits: vec![cfg.mapping.cell_bits],
            adc_precision: [cfg.adc.precision; 2],
            devices: vec![DeviceChoice::Model(cfg.device.clone())],
            tolerance: 1.0 - f64::EPSILON,
            seeds: default_seeds(),
            verify_seeds: default_verify_seeds(),
        }
    }
}

/// Fidelity of one configuration, averaged over seeds when the device is noisy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub seeds: Vec<u64>,
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check(cfg: &SimulationConfig) -> Result<(), DseError> {
    let report = validate(cfg);
    match report.errors.first() {
        Some(i) => Err(DseError::Config(format!("{}: {}", i.path, i.message))),
        None => Ok(()),
    }
}

/// CIM fidelity of `cfg`; noiseless devices need a single run.
pub fn cim_fidelity(
    cfg: &SimulationConfig,
    net: &Network,
    bundle: &ModelBundle,
    seeds: &[u64],
) -> Result<FidelityEstimate, DseError> {
    check(cfg)?;
    let seeds: Vec<u64> = if cfg.device.sigma_cell > 0.0 || cfg.arch.dmm_device.sigma_cell > 0.0 {
        seeds.to_vec()
    } else {
        vec![cfg.seed]
    };
    let fids = seeds
        .iter()
        .map(|&s| {
            let c = SimulationConfig { seed: s, ..cfg.clone() };
            let run = run_cim(net, &bundle.inputs, &c)?;
            Ok(fidelity(&run.outputs, &bundle.labels)?)
        })
        .collect::<Result<Vec<f64>, DseError>>()?;
    let (mean, stderr) = mean_stderr(&fids);
    Ok(FidelityEstimate { mean, stderr, seeds })
}

/// Fidelity and average-mode hardware figures of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEval {
    pub config: SimulationConfig,
    pub fidelity: FidelityEstimate,
    pub report: HardwareReport,
}

/// Evaluates a single design point.
pub fn evaluate_point(cfg: &SimulationConfig, bundle: &ModelBundle, seeds: &[u64]) -> Result<PointEval, DseError> {
    let net = bundle.network()?;
    evaluate_on(cfg, &net, bundle, seeds)
}

fn evaluate_on(
    cfg: &SimulationConfig,
    net: &Network,
    bundle: &ModelBundle,
    seeds: &[u64],
) -> Result<PointEval, DseError> {
    let fid = cim_fidelity(cfg, net, bundle, seeds)?;
    let run = run_cim(net, &bundle.inputs, cfg)?;
    let report = estimate_average(&build_chip(net, cfg)?, &run.stats)?;
    Ok(PointEval {
        config: cfg.clone(),
        fidelity: fid,
        report,
    })
}

/// Smallest ADC precision in `range` whose fidelity reaches
/// `baseline - tolerance`, scanning upward; `None` if none does.
pub fn minimal_adc_precision(
    cfg: &SimulationConfig,
    bundle: &ModelBundle,
    baseline: f64,
    tolerance: f64,
    range: [u32; 2],
    seeds: &[u64],
) -> Result<Option<u32>, DseError> {
    let net = bundle.network()?;
    minimal_adc_on(cfg, &net, bundle, baseline, tolerance, range, seeds).map(|r| r.map(|(p, _)| p))
}

fn minimal_adc_on(
    cfg: &SimulationConfig,
    net: &Network,
    bundle: &ModelBundle,
    baseline: f64,
    tolerance: f64,
    range: [u32; 2],
    seeds: &[u64],
) -> Result<Option<(u32, FidelityEstimate)>, DseError> {
    for p in range[0]..=range[1] {
        let mut c = cfg.clone();
        c.adc.precision = p;
        let f = cim_fidelity(&c, net, bundle, seeds)?;
        if f.mean >= baseline - tolerance {
            return Ok(Some((p, f)));
        }
    }
    Ok(None)
}

/// Higher energy efficiency wins, then smaller area, then higher throughput.
fn better(a: &HardwareReport, b: &HardwareReport) -> bool {
    let (ma, mb) = (a.metrics, b.metrics);
    if ma.tops_per_w != mb.tops_per_w {
        return ma.tops_per_w > mb.tops_per_w;
    }
    if a.area_mm2 != b.area_mm2 {
        return a.area_mm2 < b.area_mm2;
    }
    ma.tops > mb.tops
}

/// One evaluated candidate of a stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub label: String,
    pub scheme: QuantScheme,
    pub bits: u32,
    pub design: Design,
    pub cell_bits: u32,
    pub adc_precision: u32,
    pub device: String,
    pub feasible: bool,
    pub fidelity: Option<f64>,
    pub metrics: Option<Metrics>,
    pub area_mm2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Candidate {
    fn new(label: String, cfg: &SimulationConfig) -> Self {
        Candidate {
            label,
            scheme: cfg.quant.scheme,
            bits: cfg.quant.weight_bits,
            design: cfg.mapping.design,
            cell_bits: cfg.mapping.cell_bits,
            adc_precision: cfg.adc.precision,
            device: cfg.device.name.clone(),
            feasible: false,
            fidelity: None,
            metrics: None,
            area_mm2: None,
            note: None,
        }
    }

    fn with(mut self, fid: f64, report: Option<&HardwareReport>) -> Self {
        self.feasible = true;
        self.fidelity = Some(fid);
        if let Some(r) = report {
            self.metrics = Some(r.metrics);
            self.area_mm2 = Some(r.area_mm2);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: char,
    /// Fidelity the tolerance is measured from.
    pub baseline: f64,
    pub candidates: Vec<Candidate>,
    /// Index into `candidates`.
    pub chosen: usize,
    pub config: SimulationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub fidelity: FidelityEstimate,
    pub threshold: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub stage: char,
    pub candidate: String,
    pub event: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DSEResult {
    pub reference_fidelity: f64,
    pub tolerance: f64,
    pub stages: Vec<StageOutcome>,
    pub selection: PointEval,
    pub verification: Verification,
    pub log: Vec<LogEntry>,
}

struct Ctx {
    net: Network,
    log: Vec<LogEntry>,
}

impl Ctx {
    fn note(&mut self, stage: char, candidate: &str, event: String) {
        self.log.push(LogEntry {
            stage,
            candidate: candidate.to_string(),
            event,
        });
    }

    fn pick(
        &mut self,
        stage: char,
        baseline: f64,
        results: Vec<(Candidate, Option<PointEval>)>,
    ) -> Result<(StageOutcome, PointEval), DseError> {
        let mut best: Option<(usize, PointEval)> = None;
        for (i, (c, e)) in results.iter().enumerate() {
            let event = match (&c.fidelity, &c.metrics) {
                (Some(f), Some(m)) => format!(
                    "feasible: fidelity {f:.4}, {:.4} TOPS/W, {:.6} mm^2, {:.4} TOPS",
                    m.tops_per_w,
                    c.area_mm2.unwrap_or(0.0),
                    m.tops
                ),
                _ => format!("infeasible{}", c.note.as_ref().map(|n| format!(": {n}")).unwrap_or_default()),
            };
            self.note(stage, &c.label, event);
            if let Some(e) = e {
                if best.as_ref().is_none_or(|(_, b)| better(&e.report, &b.report)) {
                    best = Some((i, e.clone()));
                }
            }
        }
        let (chosen, eval) = best.ok_or(DseError::Infeasible { stage })?;
        let label = results[chosen].0.label.clone();
        self.note(stage, &label, "selected".into());
        Ok((
            StageOutcome {
                stage,
                baseline,
                candidates: results.into_iter().map(|(c, _)| c).collect(),
                chosen,
                config: eval.config.clone(),
            },
            eval,
        ))
    }
}

/// Runs the three greedy stages from `base`.
pub fn explore(space: &SearchSpace, bundle: &ModelBundle, base: &SimulationConfig) -> Result<DSEResult, DseError> {
    space.validate()?;
    check(base)?;
    let net = bundle.network()?;
    let reference = fidelity(&run_reference(&net, &bundle.inputs)?, &bundle.labels)?;
    let mut ctx = Ctx { net, log: Vec::new() };
    let tol = space.tolerance;
    let seeds = &space.seeds;

    // Stage A: minimal tied precision per scheme in software, then hardware at the base point.
    let a_results: Vec<(Candidate, Option<PointEval>)> = space
        .schemes
        .par_iter()
        .map(|&scheme| -> Result<_, DseError> {
            let mut cfg = base.clone();
            cfg.quant.scheme = scheme;
            for bits in space.bits[0]..=space.bits[1] {
                cfg.quant.weight_bits = bits;
                cfg.quant.input_bits = bits;
                let sw = fidelity(&run_software(&ctx.net, &bundle.inputs, &cfg.quant)?, &bundle.labels)?;
                if sw >= reference - tol {
                    let e = evaluate_on(&cfg, &ctx.net, bundle, seeds)?;
                    let c = Candidate::new(format!("{scheme} N=M={bits}"), &cfg).with(sw, Some(&e.report));
                    return Ok((c, Some(e)));
                }
            }
            let mut c = Candidate::new(format!("{scheme}"), &cfg);
            c.note = Some(format!("no precision up to {} bits", space.bits[1]));
            Ok((c, None))
        })
        .collect::<Result<_, _>>()?;
    let (stage_a, eval_a) = ctx.pick('A', reference, a_results)?;
    let quant = eval_a.config.quant.clone();
    let baseline = fidelity(&run_software(&ctx.net, &bundle.inputs, &quant)?, &bundle.labels)?;

    // Stage B: design × cell precision on a lossless device.
    let kmax = space.cell_bits.iter().copied().max().unwrap_or(1);
    let ideal = DeviceModel {
        on_off_ratio: OnOffRatio::INFINITE,
        sigma_cell: 0.0,
        cell_bits_max: kmax,
        ..DeviceModel::ideal()
    };
    let combos: Vec<(Design, u32)> = space
        .designs
        .iter()
        .flat_map(|&d| space.cell_bits.iter().map(move |&k| (d, k)))
        .collect();
    let b_results: Vec<(Candidate, Option<PointEval>)> = combos
        .par_iter()
        .map(|&(design, k)| -> Result<_, DseError> {
            let mut cfg = eval_a.config.clone();
            cfg.mapping.design = design;
            cfg.mapping.cell_bits = k;
            cfg.device = ideal.clone();
            let label = format!("{design} k={k}");
            match minimal_adc_on(&cfg, &ctx.net, bundle, baseline, tol, space.adc_precision, seeds)? {
                Some((p, f)) => {
                    cfg.adc.precision = p;
                    let e = evaluate_on(&cfg, &ctx.net, bundle, seeds)?;
                    Ok((Candidate::new(label, &cfg).with(f.mean, Some(&e.report)), Some(e)))
                }
                None => {
                    let mut c = Candidate::new(label, &cfg);
                    c.note = Some(format!("no ADC precision up to {}", space.adc_precision[1]));
                    Ok((c, None))
                }
            }
        })
        .collect::<Result<_, _>>()?;
    let (stage_b, eval_b) = ctx.pick('B', baseline, b_results)?;

    // Stage C: real devices, lowering cell precision when fidelity collapses.
    let devices = space.devices.iter().map(DeviceChoice::resolve).collect::<Result<Vec<_>, _>>()?;
    let c_results: Vec<(Candidate, Option<PointEval>)> = devices
        .par_iter()
        .map(|dev| -> Result<_, DseError> {
            let chosen_k = eval_b.config.mapping.cell_bits;
            let mut ks: Vec<u32> = space
                .cell_bits
                .iter()
                .copied()
                .filter(|&k| k <= chosen_k && k <= dev.cell_bits_max)
                .collect();
            ks.sort_unstable_by(|a, b| b.cmp(a));
            let mut notes = Vec::new();
            for k in ks {
                let mut cfg = eval_b.config.clone();
                cfg.device = dev.clone();
                cfg.mapping.cell_bits = k;
                let label = format!("{} k={k}", dev.name);
                let found = if k == chosen_k {
                    let f = cim_fidelity(&cfg, &ctx.net, bundle, seeds)?;
                    (f.mean >= baseline - tol).then_some((cfg.adc.precision, f))
                } else {
                    minimal_adc_on(&cfg, &ctx.net, bundle, baseline, tol, space.adc_precision, seeds)?
                };
                match found {
                    Some((p, f)) => {
                        cfg.adc.precision = p;
                        let e = evaluate_on(&cfg, &ctx.net, bundle, seeds)?;
                        let mut c = Candidate::new(label, &cfg).with(f.mean, Some(&e.report));
                        if !notes.is_empty() {
                            c.note = Some(notes.join("; "));
                        }
                        return Ok((c, Some(e)));
                    }
                    None => notes.push(format!("k={k} below tolerance")),
                }
            }
            let mut cfg = eval_b.config.clone();
            cfg.device = dev.clone();
            let mut c = Candidate::new(dev.name.clone(), &cfg);
            c.note = Some(if notes.is_empty() {
                "no admissible cell precision".into()
            } else {
                notes.join("; ")
            });
            Ok((c, None))
        })
        .collect::<Result<_, _>>()?;
    let (stage_c, selection) = ctx.pick('C', baseline, c_results)?;

    let fresh = cim_fidelity(&selection.config, &ctx.net, bundle, &space.verify_seeds)?;
    let threshold = baseline - tol - 2.0 * fresh.stderr.max(selection.fidelity.stderr);
    let verification = Verification {
        holds: fresh.mean >= threshold,
        threshold,
        fidelity: fresh,
    };
    ctx.note(
        'C',
        "selection",
        format!(
            "re-verified on fresh seeds: {:.4} vs threshold {:.4}",
            verification.fidelity.mean, threshold
        ),
    );
    Ok(DSEResult {
        reference_fidelity: reference,
        tolerance: tol,
        stages: vec![stage_a, stage_b, stage_c],
        selection,
        verification,
        log: ctx.log,
    })
}

impl DSEResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serialization is infallible")
    }

    /// Per-stage tables: scheme/precision, design/cell/ADC precision, device.
    pub fn render_tables(&self) -> String {
        let mut out = String::new();
        let titles = [
            "Stage A: quantization",
            "Stage B: mapping design, cell and ADC precision",
            "Stage C: device",
        ];
        for (s, title) in self.stages.iter().zip(titles) {
            let _ = writeln!(out, "{title} (baseline fidelity {:.4})", s.baseline);
            let _ = writeln!(
                out,
                "  {:<26}{:>5}{:>4}{:>5}{:>10}{:>12}{:>10}{:>12}",
                "candidate", "N", "k", "ADC", "fidelity", "TOPS/W", "TOPS", "TOPS/mm^2"
            );
            for (i, c) in s.candidates.iter().enumerate() {
                let mark = if i == s.chosen { '*' } else { ' ' };
                let fid = c.fidelity.map_or("-".to_string(), |f| format!("{f:.4}"));
                let (w, t, a) = c.metrics.map_or(("-".into(), "-".into(), "-".into()), |m| {
                    (
                        format!("{:.4}", m.tops_per_w),
                        format!("{:.4}", m.tops),
                        format!("{:.4}", m.tops_per_mm2),
                    )
                });
                let _ = writeln!(
                    out,
                    "{mark} {:<26}{:>5}{:>4}{:>5}{:>10}{:>12}{:>10}{:>12}",
                    c.label, c.bits, c.cell_bits, c.adc_precision, fid, w, t, a
                );
            }
            let _ = writeln!(out);
        }
        let sel = &self.selection.config;
        let _ = writeln!(
            out,
            "selection: {} N=M={} {} k={} ADC={} ({:?}) on {}; fidelity {:.4}, re-verified {:.4} ({})",
            sel.quant.scheme,
            sel.quant.weight_bits,
            sel.mapping.design,
            sel.mapping.cell_bits,
            sel.adc.precision,
            sel.adc.kind,
            sel.device.name,
            self.selection.fidelity.mean,
            self.verification.fidelity.mean,
            if self.verification.holds { "holds" } else { "VIOLATED" }
        );
        out
    }
}

/// Calibrated-ADC config at `(design, k, p)` on `device`, keeping the rest of `base`.
pub fn point(base: &SimulationConfig, design: Design, k: u32, p: u32, device: DeviceModel) -> SimulationConfig {
    let mut c = base.clone();
    c.mapping.design = design;
    c.mapping.cell_bits = k;
    c.adc.precision = p;
    c.adc.kind = AdcKind::Calibrated;
    c.device = device;
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorio::{synth_model, NetworkDesc};

    fn small_bundle() -> ModelBundle {
        let mut desc = NetworkDesc::tiny_cnn();
        desc.num_inputs = 32;
        synth_model(7, &desc).unwrap()
    }

    fn ideal_k(k: u32) -> DeviceModel {
        DeviceModel {
            cell_bits_max: k.max(4),
            ..DeviceModel::ideal()
        }
    }

    #[test]
    fn space_validation() {
        let mut s = SearchSpace::singleton(&SimulationConfig::example());
        assert!(s.validate().is_ok());
        s.tolerance = 0.0;
        assert!(s.validate().is_err());
        s.tolerance = 0.03;
        s.designs.clear();
        assert!(s.validate().is_err());
        let text = r#"{"schemes":["uniform-symmetric"],"bits":[4,8],"designs":["design2"],
            "cell_bits":[2],"adc_precision":[4,8],"devices":["rram-150"]}"#;
        let s = SearchSpace::from_json(text).unwrap();
        assert_eq!(s.tolerance, 0.03);
        assert_eq!(s.seeds.len(), 5);
        assert!(SearchSpace::from_json(&text.replace("rram-150", "unobtainium")).is_err());
    }

    #[test]
    fn vacuous_tolerance_gives_lowest_precision() {
        let b = small_bundle();
        let cfg = point(&SimulationConfig::example(), Design::Design1, 2, 3, ideal_k(2));
        let p = minimal_adc_precision(&cfg, &b, 1.0, 1.0, [3, 9], &[1]).unwrap();
        assert_eq!(p, Some(3));
    }

    #[test]
    fn lossless_precision_is_feasible_at_zero_tolerance() {
        let b = small_bundle();
        let mut cfg = point(&SimulationConfig::example(), Design::Design2, 2, 10, ideal_k(2));
        cfg.quant.weight_bits = 6;
        cfg.quant.input_bits = 6;
        let net = b.network().unwrap();
        let sw = fidelity(&run_software(&net, &b.inputs, &cfg.quant).unwrap(), &b.labels).unwrap();
        // 128 rows of 2-bit digits: at most 2·128·3+1 < 2^10 distinct sums
        assert_eq!(minimal_adc_precision(&cfg, &b, sw, 0.0, [10, 10], &[1]).unwrap(), Some(10));
    }

    #[test]
    fn minimal_precision_nonincreasing_in_tolerance() {
        let b = small_bundle();
        let cfg = point(&SimulationConfig::example(), Design::Design3, 2, 1, ideal_k(2));
        let mut last = u32::MAX;
        for tol in [0.01, 0.05, 0.2, 0.5] {
            let p = minimal_adc_precision(&cfg, &b, 1.0, tol, [1, 10], &[1])
                .unwrap()
                .unwrap_or(u32::MAX - 1);
            assert!(p <= last, "tol {tol}: {p} > {last}");
            last = p;
        }
    }

    #[test]
    fn singleton_space_equals_direct_evaluation() {
        let b = small_bundle();
        let base = SimulationConfig::example();
        let space = SearchSpace::singleton(&base);
        let r = explore(&space, &b, &base).unwrap();
        let direct = evaluate_point(&base, &b, &space.seeds).unwrap();
        assert_eq!(r.selection, direct);
        assert!(r.verification.holds);
        assert_eq!(r.stages.len(), 3);
        assert!(r.stages.iter().all(|s| s.candidates.len() == 1));
        assert!(r.log.iter().filter(|l| l.event == "selected").count() == 3);
        assert!(r.render_tables().contains("selection:"));
    }

    #[test]
    fn collapsing_device_falls_back_to_lower_cell_precision() {
        let b = small_bundle();
        let mut base = SimulationConfig::example();
        base.mapping.offset_cancellation = crate::config::OffsetCancellation::None;
        let space = SearchSpace {
            schemes: vec![QuantScheme::UniformSymmetric],
            bits: [6, 8],
            designs: vec![Design::Design1],
            cell_bits: vec![1, 4],
            adc_precision: [8, 8],
            devices: vec![DeviceChoice::Preset("rram-10".into())],
            tolerance: 0.03,
            seeds: vec![1],
            verify_seeds: vec![2],
        };
        match explore(&space, &b, &base) {
            Ok(r) => {
                let c = &r.stages[2].candidates[0];
                assert!(c.cell_bits < 4, "{c:?}");
            }
            Err(DseError::Infeasible { stage }) => assert_eq!(stage, 'C'),
            Err(e) => panic!("{e}"),
        }
    }
}
