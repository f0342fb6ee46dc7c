//! Internal energy, ergotropy, anti-ergotropy and capacity of the battery.
//!
//! With `H = (ħγB₀/2) σ_z` per atom the energy is `E = (k/2) s_z`, so the
//! fully charged state sits at `+k/2` and the discharged one at `−k/2`. The
//! unitary orbit of a state of Bloch length `S` spans `[−kS/2, +kS/2]`, which
//! gives the closed forms below.

use serde::{Deserialize, Serialize};

use super::{BlochState, EnsembleConfig};
use crate::units::Energy;

impl BlochState {
    /// `E / k`.
    pub fn energy_per_k(&self) -> f64 {
        0.5 * self.sz
    }

    /// `𝒞 / k = S`.
    pub fn capacity_per_k(&self) -> f64 {
        self.length()
    }

    /// Largest unitary energy decrease, in units of `k`.
    pub fn ergotropy_per_k(&self) -> f64 {
        0.5 * (self.sz + self.length())
    }

    /// Largest unitary energy increase, in units of `k`.
    pub fn antiergotropy_per_k(&self) -> f64 {
        0.5 * (self.length() - self.sz)
    }

    pub fn coherent_capacity_per_k(&self) -> f64 {
        self.coherence()
    }

    pub fn incoherent_capacity_per_k(&self) -> f64 {
        self.sz.abs()
    }
}

pub fn internal_energy(state: BlochState, cfg: &EnsembleConfig) -> Energy {
    cfg.energy_scale().scale(state.energy_per_k())
}

/// `max_U E − min_U E = k·S`.
pub fn capacity_exact(state: BlochState, cfg: &EnsembleConfig) -> Energy {
    cfg.energy_scale().scale(state.capacity_per_k())
}

pub fn ergotropy(state: BlochState, cfg: &EnsembleConfig) -> Energy {
    cfg.energy_scale().scale(state.ergotropy_per_k())
}

pub fn antiergotropy(state: BlochState, cfg: &EnsembleConfig) -> Energy {
    cfg.energy_scale().scale(state.antiergotropy_per_k())
}

/// `𝒞_c = k·√(sx² + sy²)`.
pub fn coherent_capacity(state: BlochState, cfg: &EnsembleConfig) -> Energy {
    cfg.energy_scale().scale(state.coherent_capacity_per_k())
}

/// `𝒞_inc = k·|sz|`.
pub fn incoherent_capacity(state: BlochState, cfg: &EnsembleConfig) -> Energy {
    cfg.energy_scale().scale(state.incoherent_capacity_per_k())
}

/// All energetic figures of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub energy: Energy,
    pub ergotropy: Energy,
    pub antiergotropy: Energy,
    pub capacity: Energy,
    pub coherent_capacity: Energy,
    pub incoherent_capacity: Energy,
}

impl CapacityReport {
    pub fn new(state: BlochState, cfg: &EnsembleConfig) -> Self {
        CapacityReport {
            energy: internal_energy(state, cfg),
            ergotropy: ergotropy(state, cfg),
            antiergotropy: antiergotropy(state, cfg),
            capacity: capacity_exact(state, cfg),
            coherent_capacity: coherent_capacity(state, cfg),
            incoherent_capacity: incoherent_capacity(state, cfg),
        }
    }

    /// `|𝒞² − 𝒞_c² − 𝒞_inc²| / 𝒞²`, zero when the capacity vanishes.
    pub fn pythagorean_residual(&self) -> f64 {
        let c2 = self.capacity.joules().powi(2);
        let parts =
            self.coherent_capacity.joules().powi(2) + self.incoherent_capacity.joules().powi(2);
        if c2 == 0.0 {
            parts
        } else {
            (c2 - parts).abs() / c2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{rotate, Rotation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn k_cfg(k_ev: f64) -> EnsembleConfig {
        EnsembleConfig::with_energy_scale(
            Energy::from_ev(k_ev),
            EnsembleConfig::RB87_GAMMA,
            EnsembleConfig::DEFAULT_B0,
        )
        .unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn internal_energy_reference_points() {
        let cfg = k_cfg(2.0 * 49.8);
        assert!(rel(internal_energy(BlochState::CHARGED, &cfg).ev(), 49.8) < 1e-12);
        assert_eq!(internal_energy(BlochState::UNPOLARIZED, &cfg).ev(), 0.0);
        assert_eq!(
            internal_energy(BlochState::new(1.0, 0.0, 0.0).unwrap(), &cfg).ev(),
            0.0
        );
    }

    #[test]
    fn capacity_reference_points() {
        let cfg = k_cfg(49.8);
        assert!(rel(capacity_exact(BlochState::CHARGED, &cfg).ev(), 49.8) < 1e-12);
        assert_eq!(capacity_exact(BlochState::UNPOLARIZED, &cfg).ev(), 0.0);
    }

    #[test]
    fn ergotropy_reference_points() {
        let cfg = k_cfg(1.0);
        let k = cfg.energy_scale();
        assert!(rel(ergotropy(BlochState::CHARGED, &cfg).joules(), k.joules()) < 1e-12);
        assert_eq!(antiergotropy(BlochState::CHARGED, &cfg).joules(), 0.0);
        let passive = BlochState::new(0.0, 0.0, -0.4).unwrap();
        assert_eq!(ergotropy(passive, &cfg).joules(), 0.0);
        let equatorial = BlochState::new(0.7, 0.0, 0.0).unwrap();
        let half = 0.35 * k.joules();
        assert!(rel(ergotropy(equatorial, &cfg).joules(), half) < 1e-12);
        assert!(rel(antiergotropy(equatorial, &cfg).joules(), half) < 1e-12);
    }

    #[test]
    fn coherence_split_at_25_degrees() {
        let cfg = k_cfg(49.8);
        let s = rotate(BlochState::CHARGED, Rotation::x_deg(25.0));
        let r = CapacityReport::new(s, &cfg);
        // measured values 49.37, 21.36, 44.58 eV lie within 3% of the pure-state geometry
        assert!(rel(49.37, r.capacity.ev()) < 0.03);
        assert!(rel(21.36, r.coherent_capacity.ev()) < 0.03);
        assert!(rel(44.58, r.incoherent_capacity.ev()) < 0.03);
        assert!(rel(r.coherent_capacity.ev(), 21.04638943468683) < 1e-12);
        assert!(rel(r.incoherent_capacity.ev(), 45.13412779442516) < 1e-12);
    }

    #[test]
    fn pure_axis_splits() {
        let cfg = k_cfg(1.0);
        let r = CapacityReport::new(BlochState::CHARGED, &cfg);
        assert_eq!(r.coherent_capacity.joules(), 0.0);
        assert_eq!(r.incoherent_capacity, r.capacity);
        let r = CapacityReport::new(BlochState::new(1.0, 0.0, 0.0).unwrap(), &cfg);
        assert_eq!(r.incoherent_capacity.joules(), 0.0);
        assert_eq!(r.coherent_capacity, r.capacity);
    }

    /// Independent route: max − min of `E = (k/2) s_z` over a dense grid of
    /// `R_x(β) R_z(α)`, written out by hand rather than through `rotate`.
    fn brute_force_capacity_per_k(s: BlochState, step_deg: f64) -> f64 {
        let n = (360.0 / step_deg).round() as usize;
        let trig: Vec<(f64, f64)> = (0..n)
            .map(|i| (i as f64 * step_deg).to_radians().sin_cos())
            .collect();
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for &(sa, ca) in &trig {
            let y = s.sx * sa + s.sy * ca;
            for &(sb, cb) in &trig {
                let e = 0.5 * (y * sb + s.sz * cb);
                hi = hi.max(e);
                lo = lo.min(e);
            }
        }
        hi - lo
    }

    #[test]
    fn capacity_matches_brute_force_at_half_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0001);
        let mut s = BlochState::sample(&mut rng);
        let len = s.length();
        s = BlochState::new(0.5 * s.sx / len, 0.5 * s.sy / len, 0.5 * s.sz / len).unwrap();
        let brute = brute_force_capacity_per_k(s, 0.1);
        let bound = 1.0 - 0.05f64.to_radians().cos().powi(2);
        assert!(
            (0.5 - brute) >= -1e-12 && (0.5 - brute) <= 0.5 * bound + 1e-12,
            "{brute}"
        );
        assert!(rel(s.capacity_per_k(), 0.5) < 1e-12);
    }

    #[test]
    fn capacity_matches_brute_force_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0002);
        let bound = 1.0 - 0.05f64.to_radians().cos().powi(2);
        for _ in 0..3 {
            let s = BlochState::sample(&mut rng);
            let exact = s.capacity_per_k();
            let brute = brute_force_capacity_per_k(s, 0.1);
            assert!(exact - brute >= -1e-12);
            assert!(exact - brute <= exact * bound + 1e-12);
        }
    }

    #[test]
    fn identities_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0003);
        let cfg = k_cfg(49.8);
        for _ in 0..10_000 {
            let s = BlochState::sample(&mut rng);
            let r = CapacityReport::new(s, &cfg);
            assert!(r.pythagorean_residual() < 1e-12);
            let sum = (r.ergotropy + r.antiergotropy).joules();
            assert!((sum - r.capacity.joules()).abs() <= 1e-12 * r.capacity.joules().max(1e-300));
            assert!(r.ergotropy.joules() >= 0.0 && r.antiergotropy.joules() >= 0.0);
        }
    }
}
