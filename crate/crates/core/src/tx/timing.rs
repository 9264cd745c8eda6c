//! Programmable pulse sequencing of the delay network.
//!
//! Hardware mapping: channels {1, 3} share IQ-MZM A, channels {2, 4} share
//! IQ-MZM B. The AWG delays MZM B's pulse train by `tau_awg`; on-chip loops
//! delay channels {1, 2} by `tau_wg`. With MZM A's pulse (channel 3) at t = 0,
//! all times modulo the window TW:
//!
//! ```text
//! t3 = 0, t4 = tau_awg, t1 = tau_wg, t2 = tau_awg + tau_wg
//! ```
//!
//! Equal spacing `t_{k+1} - t_k = Dt (mod TW)` then forces `tau_awg = Dt` and
//! `tau_wg = -2 Dt (mod TW)`.

use crate::error::{Error, Result};

/// Selectable on-chip loop delays, s.
pub const TAU_WG_OPTIONS: [f64; 2] = [300e-12, 500e-12];

/// Slack on time comparisons, s.
pub const TIMING_TOL: f64 = 0.5e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingSolution {
    pub tau_wg: f64,
    pub tau_awg: f64,
    /// Pulse centres of channels 1..=4 in `[0, TW)`.
    pub centers: [f64; 4],
}

fn wrap(t: f64, tw: f64) -> f64 {
    let r = t.rem_euclid(tw);
    if tw - r < TIMING_TOL {
        0.0
    } else {
        r
    }
}

/// Distance of `t` from the nearest multiple of `tw`.
pub(crate) fn mod_distance(t: f64, tw: f64) -> f64 {
    let r = t.rem_euclid(tw);
    r.min(tw - r)
}

/// Centres produced by a given pair of delays.
pub fn centers_for(tau_wg: f64, tau_awg: f64, tw: f64) -> [f64; 4] {
    [
        wrap(tau_wg, tw),
        wrap(tau_awg + tau_wg, tw),
        0.0,
        wrap(tau_awg, tw),
    ]
}

/// Finds loop and AWG delays giving pulse spacing `dt` inside windows `tw`.
pub fn timing_solve(dt: f64, tw: f64, tau_wg_options: &[f64]) -> Result<TimingSolution> {
    let infeasible = || Error::InfeasibleTiming {
        dt_ps: dt * 1e12,
        tw_ps: tw * 1e12,
        nearest_dt_ps: nearest_feasible_dt(dt, tw, tau_wg_options).map(|d| d * 1e12),
    };
    if !(dt > 0.0) || !(tw > 0.0) || 4.0 * dt > tw + TIMING_TOL {
        return Err(infeasible());
    }
    tau_wg_options
        .iter()
        .find(|&&wg| mod_distance(wg + 2.0 * dt, tw) < TIMING_TOL)
        .map(|&tau_wg| TimingSolution {
            tau_wg,
            tau_awg: dt,
            centers: centers_for(tau_wg, dt, tw),
        })
        .ok_or_else(infeasible)
}

/// Closest `Dt` in `(0, TW/4]` reachable with one of the loop delays.
pub fn nearest_feasible_dt(dt: f64, tw: f64, tau_wg_options: &[f64]) -> Option<f64> {
    if !(tw > 0.0) {
        return None;
    }
    let mut best: Option<f64> = None;
    for &wg in tau_wg_options {
        // 2 Dt = m TW - tau_wg
        let mut m = 0i64;
        loop {
            let cand = (m as f64 * tw - wg) / 2.0;
            if cand > tw / 4.0 + TIMING_TOL {
                break;
            }
            if cand > 0.0 && best.map_or(true, |b| (cand - dt).abs() < (b - dt).abs()) {
                best = Some(cand);
            }
            m += 1;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    const PS: f64 = 1e-12;

    #[derive(Clone, Copy, Debug, PartialEq)]
    struct Slot {
        mzm_b: bool,
        looped: bool,
    }

    /// All (tau_wg, tau_awg in whole ps, channel-to-slot assignment) lattice
    /// points whose centres are spaced by Dt modulo TW in channel order.
    fn enumerate(dt_ps: i64, tw_ps: i64) -> Vec<(i64, i64, [Slot; 4])> {
        let slots = [
            Slot { mzm_b: false, looped: false },
            Slot { mzm_b: false, looped: true },
            Slot { mzm_b: true, looped: false },
            Slot { mzm_b: true, looped: true },
        ];
        let perms = permutations4();
        let mut out = Vec::new();
        for wg in [300i64, 500] {
            for awg in 0..tw_ps {
                for p in &perms {
                    let assign = [slots[p[0]], slots[p[1]], slots[p[2]], slots[p[3]]];
                    let t: Vec<i64> = assign
                        .iter()
                        .map(|s| (s.mzm_b as i64 * awg + s.looped as i64 * wg).rem_euclid(tw_ps))
                        .collect();
                    let ok = (0..3).all(|k| (t[k + 1] - t[k] - dt_ps).rem_euclid(tw_ps) == 0);
                    if ok {
                        out.push((wg, awg, assign));
                    }
                }
            }
        }
        out
    }

    fn permutations4() -> Vec<[usize; 4]> {
        let mut v = Vec::new();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let p = [a, b, c, d];
                        let mut seen = [false; 4];
                        p.iter().for_each(|&x| seen[x] = true);
                        if seen.iter().all(|&s| s) {
                            v.push(p);
                        }
                    }
                }
            }
        }
        v
    }

    fn hardware_assignment() -> [Slot; 4] {
        // ch1: MZM A looped, ch2: MZM B looped, ch3: MZM A, ch4: MZM B
        [
            Slot { mzm_b: false, looped: true },
            Slot { mzm_b: true, looped: true },
            Slot { mzm_b: false, looped: false },
            Slot { mzm_b: true, looped: false },
        ]
    }

    #[test]
    fn paper_configurations_match_enumeration() {
        for (dt, tw) in [(250i64, 1000i64), (150, 600), (100, 500)] {
            let sol = timing_solve(dt as f64 * PS, tw as f64 * PS, &TAU_WG_OPTIONS).unwrap();
            let lattice = enumerate(dt, tw);
            let hw: Vec<_> = lattice
                .iter()
                .filter(|(_, _, a)| *a == hardware_assignment())
                .collect();
            assert_eq!(hw.len(), 1, "unique hardware solution for Dt={dt}");
            let (wg, awg, _) = hw[0];
            assert!((sol.tau_wg - *wg as f64 * PS).abs() < 1e-15);
            assert!((sol.tau_awg - *awg as f64 * PS).abs() < 1e-15);
            for k in 0..3 {
                let d = sol.centers[k + 1] - sol.centers[k] - dt as f64 * PS;
                assert!(mod_distance(d, tw as f64 * PS) < TIMING_TOL);
            }
            assert!(sol.centers.iter().all(|&c| (0.0..tw as f64 * PS).contains(&c)));
        }
    }

    #[test]
    fn specific_solutions() {
        let s = timing_solve(250.0 * PS, 1000.0 * PS, &TAU_WG_OPTIONS).unwrap();
        assert_eq!(s.tau_wg, 500e-12);
        let s = timing_solve(150.0 * PS, 600.0 * PS, &TAU_WG_OPTIONS).unwrap();
        assert_eq!(s.tau_wg, 300e-12);
        let s = timing_solve(100.0 * PS, 500.0 * PS, &TAU_WG_OPTIONS).unwrap();
        assert_eq!(s.tau_wg, 300e-12);
        // channels 1..4 at 300, 400, 500(=0), 600(=100): 400 ps occupied, 100 ps idle
        let mut c = s.centers.map(|t| (t * 1e12).round() as i64);
        c.sort();
        assert_eq!(c, [0, 100, 300, 400]);
    }

    #[test]
    fn infeasible_reports_nearest() {
        match timing_solve(200.0 * PS, 1000.0 * PS, &TAU_WG_OPTIONS) {
            Err(Error::InfeasibleTiming { nearest_dt_ps: Some(n), .. }) => {
                assert!((n - 250.0).abs() < 1e-6, "{n}")
            }
            other => panic!("{other:?}"),
        }
        assert!(timing_solve(300.0 * PS, 1000.0 * PS, &TAU_WG_OPTIONS).is_err());
        assert!(enumerate(200, 1000)
            .iter()
            .all(|(_, _, a)| *a != hardware_assignment()));
    }
}
