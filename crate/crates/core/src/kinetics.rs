//! Gas–surface rate laws and the source terms they produce.
//!
//! A reaction converts one surface group into another while consuming a gas
//! reactant: `r = k(T) · c · θ · σ` in mol/(m²·s). Because every reaction
//! has exactly one surface reactant and one surface product, the coverage
//! sources sum to zero in every section.

use serde::{Deserialize, Serialize};

use crate::config::{RateLawSpec, ReactorConfig};

/// Boltzmann constant in eV/K.
pub const BOLTZMANN_EV: f64 = 8.617_333_262e-5;

/// Rate coefficient at temperature `t` (K).
pub fn evaluate_k(law: &RateLawSpec, t: f64) -> f64 {
    match *law {
        RateLawSpec::Constant { k0 } => k0,
        RateLawSpec::Arrhenius {
            prefactor,
            activation_energy,
        } => prefactor * (-activation_energy / (BOLTZMANN_EV * t)).exp(),
        RateLawSpec::LinearAboveThreshold { threshold, slope } => {
            if t < threshold {
                0.0
            } else {
                slope * (t - threshold)
            }
        }
    }
}

/// `k · c · θ · σ`
pub fn reaction_rate(k: f64, c: f64, theta: f64, sigma: f64) -> f64 {
    k * c * theta * sigma
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceRef {
    Specific(usize),
    /// Decomposition channel: acts on every surface present.
    Any,
}

/// A reaction with all names resolved to indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledReaction {
    pub name: String,
    pub gas: usize,
    pub surface: SurfaceRef,
    pub product: usize,
    pub gas_products: Vec<(usize, f64)>,
    /// (solid index, signed stoichiometry)
    pub solid: Option<(usize, f64)>,
    pub rate_law: RateLawSpec,
}

/// Index-resolved reaction network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub reactions: Vec<CompiledReaction>,
    pub site_density: Vec<f64>,
    pub solid_molar_mass: Vec<f64>,
    pub chemicals: usize,
    /// 4/d: wall area per unit gas volume.
    pub wall_factor: f64,
}

impl Network {
    pub fn new(config: &ReactorConfig) -> Network {
        let reactions = config
            .reactions
            .iter()
            .map(|r| {
                let surface = if r.is_wildcard() {
                    SurfaceRef::Any
                } else {
                    SurfaceRef::Specific(config.surface_index(&r.surface_reactant).expect("validated"))
                };
                let solid = if r.solid_delta != 0.0 {
                    let idx = match &r.solid {
                        Some(name) => config.solid_index(name).expect("validated"),
                        None => 0,
                    };
                    Some((idx, r.solid_delta))
                } else {
                    None
                };
                CompiledReaction {
                    name: r.name.clone(),
                    gas: config.chemical_index(&r.gas_reactant).expect("validated"),
                    surface,
                    product: config.surface_index(&r.surface_product).expect("validated"),
                    gas_products: r
                        .gas_products
                        .iter()
                        .map(|g| (config.chemical_index(&g.chemical).expect("validated"), g.coefficient))
                        .collect(),
                    solid,
                    rate_law: r.rate_law,
                }
            })
            .collect();
        Network {
            reactions,
            site_density: config.surfaces.iter().map(|s| s.site_density).collect(),
            solid_molar_mass: config.solids.iter().map(|s| s.molar_mass).collect(),
            chemicals: config.chemicals.len(),
            wall_factor: 4.0 / config.geometry.diameter,
        }
    }

    pub fn surfaces(&self) -> usize {
        self.site_density.len()
    }

    pub fn solids(&self) -> usize {
        self.solid_molar_mass.len()
    }

    /// Rate coefficients of every reaction at temperature `t`.
    pub fn coefficients(&self, t: f64) -> Vec<f64> {
        self.reactions.iter().map(|r| evaluate_k(&r.rate_law, t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEvaluation {
    pub reaction: usize,
    pub section: usize,
    /// mol/(m²·s)
    pub rate: f64,
}

/// Per-section source terms, indexed `[species][section]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTerms {
    /// mol/(m³·s)
    pub gas: Vec<Vec<f64>>,
    /// 1/s
    pub coverage: Vec<Vec<f64>>,
    /// kg/(m²·s), before any etch clamping.
    pub solid: Vec<Vec<f64>>,
}

impl SourceTerms {
    pub fn zeros(net: &Network, sections: usize) -> SourceTerms {
        SourceTerms {
            gas: vec![vec![0.0; sections]; net.chemicals],
            coverage: vec![vec![0.0; sections]; net.surfaces()],
            solid: vec![vec![0.0; sections]; net.solids()],
        }
    }

    fn clear(&mut self) {
        for v in self
            .gas
            .iter_mut()
            .chain(self.coverage.iter_mut())
            .chain(self.solid.iter_mut())
        {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.gas
            .iter()
            .chain(self.coverage.iter())
            .chain(self.solid.iter())
            .all(|v| v.iter().all(|&x| x == 0.0))
    }
}

/// Rates of every reaction in every section, given concentrations
/// `[chemical][section]` and coverages `[surface][section]`.
pub fn evaluate_rates(
    net: &Network,
    temperature: f64,
    concentrations: &[Vec<f64>],
    coverages: &[Vec<f64>],
) -> Vec<RateEvaluation> {
    let ks = net.coefficients(temperature);
    let sections = concentrations.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(ks.len() * sections);
    for (ri, r) in net.reactions.iter().enumerate() {
        for x in 0..sections {
            let c = concentrations[r.gas][x];
            let rate = match r.surface {
                SurfaceRef::Specific(s) => reaction_rate(ks[ri], c, coverages[s][x], net.site_density[s]),
                SurfaceRef::Any => (0..net.surfaces())
                    .map(|s| reaction_rate(ks[ri], c, coverages[s][x], net.site_density[s]))
                    .sum(),
            };
            out.push(RateEvaluation {
                reaction: ri,
                section: x,
                rate,
            });
        }
    }
    out
}

/// Signed source terms for gas species, coverages and solids.
pub fn assemble_sources(
    net: &Network,
    temperature: f64,
    concentrations: &[Vec<f64>],
    coverages: &[Vec<f64>],
) -> SourceTerms {
    let sections = concentrations.first().map_or(0, Vec::len);
    let mut out = SourceTerms::zeros(net, sections);
    let ks = net.coefficients(temperature);
    accumulate_sources(net, &ks, concentrations, coverages, &mut out);
    out
}

/// Same as [`assemble_sources`] but reuses `out` and precomputed coefficients.
pub(crate) fn accumulate_sources(
    net: &Network,
    ks: &[f64],
    concentrations: &[Vec<f64>],
    coverages: &[Vec<f64>],
    out: &mut SourceTerms,
) {
    out.clear();
    let sections = concentrations.first().map_or(0, Vec::len);
    for (r, &k) in net.reactions.iter().zip(ks) {
        if k == 0.0 {
            continue;
        }
        let gas = &concentrations[r.gas];
        for x in 0..sections {
            let c = gas[x];
            if c <= 0.0 {
                continue;
            }
            // total rate (mol/m²/s) and site-fraction conversion rate (1/s)
            let rate = match r.surface {
                SurfaceRef::Specific(s) => {
                    let sigma = net.site_density[s];
                    let rate = reaction_rate(k, c, coverages[s][x], sigma);
                    let dtheta = rate / sigma;
                    out.coverage[s][x] -= dtheta;
                    out.coverage[r.product][x] += dtheta;
                    rate
                }
                SurfaceRef::Any => {
                    let mut rate = 0.0;
                    for s in 0..net.surfaces() {
                        let sigma = net.site_density[s];
                        let part = reaction_rate(k, c, coverages[s][x], sigma);
                        rate += part;
                        // the product surface is left unchanged by its own share
                        if s != r.product {
                            let dtheta = part / sigma;
                            out.coverage[s][x] -= dtheta;
                            out.coverage[r.product][x] += dtheta;
                        }
                    }
                    rate
                }
            };
            out.gas[r.gas][x] -= net.wall_factor * rate;
            for &(p, nu) in &r.gas_products {
                out.gas[p][x] += net.wall_factor * nu * rate;
            }
            if let Some((solid, delta)) = r.solid {
                out.solid[solid][x] += delta * rate * net.solid_molar_mass[solid];
            }
        }
    }
}
