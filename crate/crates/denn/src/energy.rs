//! Operation counting and the neuromorphic energy model.
//!
//! A synapse is *active* on a frame when its presynaptic neuron is
//! non-silent — silent inputs transmit exactly nothing and cost nothing.
//! Each active synapse of a delay layer costs `2 EXP + 3 ADD` (the
//! delay map, the kernel, and the accumulate), each neuron pays
//! `(ν+2) MUL + ν EXP + 5 ADD` for standardization and its memory
//! correction, and each layer adds a final `2 MUL` for the statistics.
//!
//! Costs are priced in clock cycles of a SpiNNaker core: one cycle per
//! addition, two per multiplication, 95 per exponential, at
//! 2.56·10⁻¹¹ J per cycle. The per-cycle figure itself derives from the
//! published chip budget — see [`ChipBudget`] — and the derivation is a
//! test.

use crate::error::{DennError, Result};
use crate::layers::{Layer, LayerTape};
use crate::network::{Network, SampleTape};
use crate::standardize::SILENT;

/// Cycle costs per primitive and the per-cycle energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    pub cycles_per_add: f64,
    pub cycles_per_mul: f64,
    pub cycles_per_exp: f64,
    pub joules_per_cycle: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            cycles_per_add: 1.0,
            cycles_per_mul: 2.0,
            cycles_per_exp: 95.0,
            joules_per_cycle: 2.56e-11,
        }
    }
}

/// Published power budget of one SpiNNaker chip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChipBudget {
    pub peak_w: f64,
    pub idle_chip_w: f64,
    pub sdram_w: f64,
    pub link_w: f64,
    pub n_links: u32,
    pub n_cores: u32,
    pub cycle_seconds: f64,
}

impl Default for ChipBudget {
    fn default() -> Self {
        ChipBudget {
            peak_w: 1.0,
            idle_chip_w: 0.36,
            sdram_w: 0.17,
            link_w: 0.063,
            n_links: 6,
            n_cores: 18,
            cycle_seconds: 5e-9,
        }
    }
}

impl ChipBudget {
    /// Energy per clock cycle of one core: peak power minus idle, SDRAM
    /// and link budgets, split across the cores, times the cycle period.
    pub fn joules_per_cycle(&self) -> f64 {
        let core_w =
            (self.peak_w - self.idle_chip_w - self.sdram_w - self.link_w * self.n_links as f64)
                / self.n_cores as f64;
        core_w * self.cycle_seconds
    }
}

/// Counts for one layer, accumulated over the frames of the counted
/// samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCounts {
    pub name: String,
    /// Synapse-frame pairs with a non-silent presynaptic neuron.
    pub active_synapses: u64,
    /// Total synapses × frames, for the activity ratio.
    pub total_synapses: u64,
    /// Neuron evaluations (output size × frames).
    pub neuron_evals: u64,
    /// Layer evaluations (frames).
    pub layer_evals: u64,
    /// Mean ratio of non-silent presynaptic neurons.
    pub tau: f64,
}

impl LayerCounts {
    pub fn adds(&self, nu: usize) -> u64 {
        let _ = nu;
        3 * self.active_synapses + 5 * self.neuron_evals
    }

    pub fn muls(&self, nu: usize) -> u64 {
        (nu as u64 + 2) * self.neuron_evals + 2 * self.layer_evals
    }

    pub fn exps(&self, nu: usize) -> u64 {
        2 * self.active_synapses + nu as u64 * self.neuron_evals
    }

    pub fn cycles(&self, model: &EnergyModel, nu: usize) -> f64 {
        self.adds(nu) as f64 * model.cycles_per_add
            + self.muls(nu) as f64 * model.cycles_per_mul
            + self.exps(nu) as f64 * model.cycles_per_exp
    }
}

/// Per-layer counts over a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct OpCounts {
    pub layers: Vec<LayerCounts>,
    pub n_samples: usize,
}

impl OpCounts {
    pub fn total_active(&self) -> u64 {
        self.layers.iter().map(|l| l.active_synapses).sum()
    }

    /// Mean active synapses per sample.
    pub fn mean_active(&self) -> f64 {
        self.total_active() as f64 / self.n_samples.max(1) as f64
    }

    /// Build counts from an architecture and an externally supplied
    /// total active-synapse count (one frame per sample). A zero count
    /// means the object did no work at all.
    pub fn from_supplied(net: &Network, total_active: u64) -> Self {
        if total_active == 0 {
            return OpCounts {
                layers: Vec::new(),
                n_samples: 1,
            };
        }
        let mut layers = layer_skeletons(net);
        if let Some(first) = layers.first_mut() {
            first.active_synapses = total_active;
        }
        OpCounts {
            layers,
            n_samples: 1,
        }
    }
}

fn layer_skeletons(net: &Network) -> Vec<LayerCounts> {
    net.layers
        .iter()
        .enumerate()
        .filter_map(|(i, layer)| match layer {
            Layer::Dense(d) => Some(LayerCounts {
                name: format!("dense{i} ({}→{})", d.core.taps(), d.core.outs()),
                active_synapses: 0,
                total_synapses: (d.core.taps() * d.core.outs()) as u64,
                neuron_evals: d.core.outs() as u64,
                layer_evals: 1,
                tau: 0.0,
            }),
            Layer::Conv(c) => Some(LayerCounts {
                name: format!("conv{i} ({}c{}s{})", c.geom.c_out, c.geom.k, c.geom.stride),
                active_synapses: 0,
                total_synapses: (c.geom.taps() * c.geom.out_len()) as u64,
                neuron_evals: c.geom.out_len() as u64,
                layer_evals: 1,
                tau: 0.0,
            }),
            Layer::MinPool { .. } => None,
        })
        .collect()
}

/// Count active synapses and primitive operations over forward tapes.
///
/// A synapse counts as active on a frame iff its presynaptic neuron is
/// non-silent there; counts accumulate over all frames of every sample.
pub fn count_active(net: &Network, tapes: &[SampleTape]) -> OpCounts {
    let mut layers = layer_skeletons(net);
    // reset per-sample baselines; they are re-accumulated per frame
    for l in &mut layers {
        l.total_synapses = 0;
        l.neuron_evals = 0;
        l.layer_evals = 0;
    }
    let mut tau_accum = vec![(0.0f64, 0u64); layers.len()];
    for sample in tapes {
        for frame in &sample.frames {
            let mut slot = 0usize;
            for (layer, tape) in net.layers.iter().zip(&frame.layers) {
                match (layer, tape) {
                    (Layer::Dense(d), LayerTape::Delay(t)) => {
                        let n_in = d.core.taps() as u64;
                        let nonsilent = (n_in as usize - t.n_silent_in()) as u64;
                        let lc = &mut layers[slot];
                        lc.active_synapses += nonsilent * d.core.outs() as u64;
                        lc.total_synapses += n_in * d.core.outs() as u64;
                        lc.neuron_evals += d.core.outs() as u64;
                        lc.layer_evals += 1;
                        tau_accum[slot].0 += nonsilent as f64 / n_in as f64;
                        tau_accum[slot].1 += 1;
                        slot += 1;
                    }
                    (Layer::Conv(c), LayerTape::Delay(t)) => {
                        // per output position: non-silent taps × channels
                        let mut active_taps = 0u64;
                        let z = &t.z_in;
                        let geom = &c.geom;
                        let taps = geom.taps();
                        for pos in 0..geom.n_positions() {
                            for tap in 0..taps {
                                let idx = geom.patch_index(pos, tap);
                                if idx >= 0 && z[idx as usize] != SILENT {
                                    active_taps += 1;
                                }
                            }
                        }
                        let lc = &mut layers[slot];
                        lc.active_synapses += active_taps * geom.c_out as u64;
                        lc.total_synapses += (taps * geom.n_positions()) as u64 * geom.c_out as u64;
                        lc.neuron_evals += geom.out_len() as u64;
                        lc.layer_evals += 1;
                        let n_in = geom.in_len();
                        let nonsilent = z.iter().filter(|&&v| v != SILENT).count();
                        tau_accum[slot].0 += nonsilent as f64 / n_in as f64;
                        tau_accum[slot].1 += 1;
                        slot += 1;
                    }
                    (Layer::MinPool { .. }, LayerTape::MinPool(_)) => {}
                    _ => {}
                }
            }
        }
    }
    for (lc, (sum, n)) in layers.iter_mut().zip(tau_accum) {
        lc.tau = if n > 0 { sum / n as f64 } else { 0.0 };
    }
    OpCounts {
        layers,
        n_samples: tapes.len(),
    }
}

/// Evaluate the cycle formula and price it in joules.
pub fn denn_energy(counts: &OpCounts, model: &EnergyModel, nu: usize) -> f64 {
    let cycles: f64 = counts.layers.iter().map(|l| l.cycles(model, nu)).sum();
    // an empty f64 sum is IEEE -0.0; energy is non-negative
    (cycles * model.joules_per_cycle).max(0.0)
}

/// One row of the energy report.
pub struct EnergyRow {
    pub layer: String,
    pub active_synapses: u64,
    pub adds: u64,
    pub muls: u64,
    pub exps: u64,
    pub cycles: f64,
    pub joules: f64,
}

/// Per-layer energy rows plus the total.
pub fn energy_report(counts: &OpCounts, model: &EnergyModel, nu: usize) -> (Vec<EnergyRow>, f64) {
    let rows: Vec<EnergyRow> = counts
        .layers
        .iter()
        .map(|l| {
            let cycles = l.cycles(model, nu);
            EnergyRow {
                layer: l.name.clone(),
                active_synapses: l.active_synapses,
                adds: l.adds(nu),
                muls: l.muls(nu),
                exps: l.exps(nu),
                cycles,
                joules: cycles * model.joules_per_cycle,
            }
        })
        .collect();
    let total = rows.iter().map(|r| r.joules).sum::<f64>().max(0.0);
    (rows, total)
}

pub fn energy_csv(counts: &OpCounts, model: &EnergyModel, nu: usize) -> String {
    let (rows, total) = energy_report(counts, model, nu);
    let mut out = String::from("layer,active_synapses,ADD,MUL,EXP,cycles,joules\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:.0},{:.6e}\n",
            r.layer, r.active_synapses, r.adds, r.muls, r.exps, r.cycles, r.joules
        ));
    }
    out.push_str(&format!("total,,,,,,{total:.6e}\n"));
    out
}

/// Instantiate the per-layer complexity formulas: `n^ℓ·(n_s^(ℓ-1) + 2)`
/// for dense layers and `C_o·H_o·W_o·(τ·C_in·k² + 2)` for convolutions,
/// with the spiking ratio `τ` measured from tapes (or 1 in the slow
/// regime without measurements).
pub fn complexity_csv(net: &Network, counts: Option<&OpCounts>) -> Result<String> {
    let mut out = String::from("layer,formula,per_frame_ops\n");
    let mut slot = 0usize;
    let mut total = 0.0;
    for (i, layer) in net.layers.iter().enumerate() {
        let (name, n_out, fan_in) = match layer {
            Layer::Dense(d) => (
                format!("dense{i}"),
                d.core.outs() as f64,
                d.core.taps() as f64,
            ),
            Layer::Conv(c) => (
                format!("conv{i}"),
                c.geom.out_len() as f64,
                c.geom.taps() as f64,
            ),
            Layer::MinPool { .. } => continue,
        };
        let tau = match counts {
            Some(c) => {
                let lc = c.layers.get(slot).ok_or_else(|| {
                    DennError::ShapeMismatch("counts do not match network".into())
                })?;
                lc.tau
            }
            None => 1.0,
        };
        let ops = n_out * (tau * fan_in + 2.0);
        total += ops;
        out.push_str(&format!("{name},n*({tau:.4}*{fan_in}+2),{ops:.1}\n"));
        slot += 1;
    }
    out.push_str(&format!("total,,{total:.1}\n"));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chip_budget_derives_published_constant() {
        let j = ChipBudget::default().joules_per_cycle();
        // (1 - 0.53 - 6·0.063)/18 · 5 ns = 2.5556e-11, within 0.5% of the
        // published 2.56e-11
        assert!((j - 2.56e-11).abs() / 2.56e-11 < 0.005, "{j}");
    }

    #[test]
    fn zero_counts_zero_energy() {
        let counts = OpCounts {
            layers: vec![],
            n_samples: 1,
        };
        assert_eq!(denn_energy(&counts, &EnergyModel::default(), 0), 0.0);
    }

    #[test]
    fn energy_monotone_in_counts() {
        let model = EnergyModel::default();
        let mk = |a: u64, n: u64| LayerCounts {
            name: "l".into(),
            active_synapses: a,
            total_synapses: a.max(n),
            neuron_evals: n,
            layer_evals: 1,
            tau: 1.0,
        };
        let base = denn_energy(
            &OpCounts {
                layers: vec![mk(100, 10)],
                n_samples: 1,
            },
            &model,
            0,
        );
        let more_syn = denn_energy(
            &OpCounts {
                layers: vec![mk(101, 10)],
                n_samples: 1,
            },
            &model,
            0,
        );
        let more_neu = denn_energy(
            &OpCounts {
                layers: vec![mk(100, 11)],
                n_samples: 1,
            },
            &model,
            0,
        );
        assert!(more_syn > base && more_neu > base);
    }

    #[test]
    fn fully_active_dense_layer_counts_every_synapse() {
        use crate::network::{forward_once, InputShape, LayerDesc, Network, NetworkSpec};
        use crate::standardize::{standardize, RegimeConfig, StandardizedTimes};
        use rand::SeedableRng;

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let net = Network::build(
            &NetworkSpec {
                input: InputShape::Flat(6),
                layers: vec![LayerDesc::Dense { out: 5 }, LayerDesc::Dense { out: 3 }],
                kernel: crate::kernel::KernelSpec::Exponential,
                regime: RegimeConfig::SLOW,
                nu: 0,
            },
            &mut rng,
        )
        .unwrap();
        let t: Vec<f64> = (0..6).map(|i| (i as f64 * 0.9).sin()).collect();
        let frame = StandardizedTimes::new(standardize(&t).unwrap().times.values);
        let (_, tape) = forward_once(&net, &[frame]).unwrap();
        let counts = count_active(&net, &[tape]);
        // slow regime, no silent inputs: every synapse is active
        assert_eq!(counts.layers[0].active_synapses, 6 * 5);
        assert_eq!(counts.layers[1].active_synapses, 5 * 3);
        assert_eq!(counts.layers[0].tau, 1.0);

        // silencing inputs removes exactly their fan-out
        let mut silent_t = t.clone();
        silent_t[0] = crate::standardize::SILENT;
        silent_t[3] = crate::standardize::SILENT;
        let frame = StandardizedTimes::new(standardize(&silent_t).unwrap().times.values);
        let (_, tape) = forward_once(&net, &[frame]).unwrap();
        let counts = count_active(&net, &[tape]);
        assert_eq!(counts.layers[0].active_synapses, 4 * 5);
    }

    #[test]
    fn complexity_formula_instantiation() {
        use crate::network::{InputShape, LayerDesc, Network, NetworkSpec};
        use crate::standardize::RegimeConfig;
        use rand::SeedableRng;

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let net = Network::build(
            &NetworkSpec {
                input: InputShape::Flat(784),
                layers: vec![LayerDesc::Dense { out: 100 }, LayerDesc::Dense { out: 10 }],
                kernel: crate::kernel::KernelSpec::Exponential,
                regime: RegimeConfig::SLOW,
                nu: 0,
            },
            &mut rng,
        )
        .unwrap();
        let csv = complexity_csv(&net, None).unwrap();
        // slow regime: 100·(784 + 2) operations per frame in layer 0
        assert!(csv.contains("dense0,n*(1.0000*784+2),78600.0"), "{csv}");
    }

    #[test]
    fn memory_terms_extend_the_formula() {
        let lc = LayerCounts {
            name: "l".into(),
            active_synapses: 7,
            total_synapses: 10,
            neuron_evals: 3,
            layer_evals: 1,
            tau: 0.7,
        };
        // ν = 0: 2 MUL per neuron, no extra EXP
        assert_eq!(lc.muls(0), 2 * 3 + 2);
        assert_eq!(lc.exps(0), 14);
        // ν = 25 adds (ν+2) MUL and ν EXP per neuron
        assert_eq!(lc.muls(25), 27 * 3 + 2);
        assert_eq!(lc.exps(25), 14 + 25 * 3);
        assert_eq!(lc.adds(25), 3 * 7 + 5 * 3);
    }
}
