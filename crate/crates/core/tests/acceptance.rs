//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Runs without the libtest harness so the lines are
//! always visible.

use rand::seq::SliceRandom;
use rand::Rng;
use rsma::amc::{code_params, select_modulation, AmcConfig, CodeParams, StreamMcs};
use rsma::phy::{
    cancel_common, common_denominator, equalize_common, equalize_private, mse, private_denominator, sic_receive,
    Equalizer, Modulation, ModulationScheme, StreamSpec,
};
use rsma::polar::{design_z_for_rate, CrcSpec, PolarCodeConfig};
use rsma::precoder::{optimize_mmf, shannon_curve, OptimizerConfig};
use rsma::presets::{ci_scale, preset};
use rsma::rng::{complex_gaussian, rng_from_seed, SimRng};
use rsma::sim::{base_channel, mmf_throughput, run_campaign, CampaignConfig, CampaignResult, RealizationRecord};
use rsma::sysmodel::{
    check_power, evaluate_group_rates, inner, superpose, GroupMap, PowerConstraintSet, PrecoderSet, Strategy,
    SystemConfig,
};
use rsma::{CMatrix, CVector, C64};
use std::process::ExitCode;
use std::time::Instant;

const BOUND_SLACK: f64 = 0.05;
const BLER_TARGET: f64 = 0.1;
const SATURATION_RATIO: f64 = 0.2;
const LLR_TOL: f64 = 1e-9;
const SIC_TOL: f64 = 1e-12;
const ORACLE_TOL: f64 = 1e-12;
const INSTANCES: usize = 100;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, name: &str, ok: bool, detail: String) {
        if !ok {
            self.failures += 1;
        }
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn run(config: &CampaignConfig) -> CampaignResult {
    let t = Instant::now();
    let r = run_campaign(config).expect("campaign runs");
    eprintln!("  ran {} ({} realizations) in {:.0?}", config.scenario.name, config.num_realizations, t.elapsed());
    r
}

fn curve(r: &CampaignResult, s: Strategy) -> Vec<f64> {
    r.points.iter().filter(|p| p.strategy == s).map(|p| p.mmf_throughput).collect()
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

fn cgauss(rng: &mut SimRng, n: usize) -> CVector {
    CVector::from_iterator(n, (0..n).map(|_| complex_gaussian(rng, 1.0)))
}

fn random_bits(rng: &mut SimRng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.gen_range(0..2u8)).collect()
}

fn random_groups(rng: &mut SimRng, k: usize, m: usize) -> GroupMap {
    let mut assign: Vec<usize> = (0..k).map(|i| i % m).collect();
    assign.shuffle(rng);
    GroupMap::new(assign, m).unwrap()
}

fn random_set(rng: &mut SimRng, nt: usize, m: usize) -> PrecoderSet {
    PrecoderSet {
        common: cgauss(rng, nt),
        private: (0..m).map(|_| cgauss(rng, nt)).collect(),
        common_rate_split: (0..m).map(|_| rng.gen_range(0.0..1.0)).collect(),
    }
}

fn all_valid(results: &[&CampaignResult]) -> bool {
    results.iter().all(|r| r.points.iter().all(|p| p.is_valid()))
}

// ---------------------------------------------------------------- campaigns

fn dominance(rep: &mut Report, ci: &[(&str, CampaignResult)]) {
    for (name, r) in ci {
        let rsma = curve(r, Strategy::Rsma);
        let sdma = curve(r, Strategy::Sdma);
        let mut ok = all_valid(&[r]) && rsma.len() == 3 && sdma.len() == 3;
        ok &= rsma.iter().zip(&sdma).all(|(a, b)| a >= b);
        let overloaded = matches!(*name, "fig4" | "fig5");
        if overloaded {
            ok &= rsma[2] > sdma[2];
        }
        rep.line(
            &format!("rsma_dominates_sdma[{name}]"),
            ok,
            format!(
                "points {:?} rsma {} sdma {}{}",
                r.points.iter().filter(|p| p.strategy == Strategy::Rsma).map(|p| p.point).collect::<Vec<_>>(),
                fmt(&rsma),
                fmt(&sdma),
                if overloaded { ", strict at 30 dB" } else { "" }
            ),
        );
    }
}

fn saturation(rep: &mut Report) {
    let c = preset("fig4").unwrap();
    let h = base_channel(&c, 0).unwrap();
    let pts = shannon_curve(&h, &c.scenario.system, &[25.0, 35.0], &c.scenario.optimizer, c.master_seed).unwrap();
    let d_rsma = pts[1].rsma - pts[0].rsma;
    let d_sdma = pts[1].sdma - pts[0].sdma;
    let ratio = d_sdma / d_rsma;
    rep.line(
        "sdma_saturates[fig4]",
        d_rsma > 0.0 && ratio < SATURATION_RATIO,
        format!(
            "25->35 dB: rsma {:.3}->{:.3}, sdma {:.3}->{:.3}, ratio {ratio:.3} < {SATURATION_RATIO}",
            pts[0].rsma, pts[1].rsma, pts[0].sdma, pts[1].sdma
        ),
    );
}

fn alpha_ordering(rep: &mut Report, ci: &[(&str, CampaignResult)]) {
    let get = |n: &str| &ci.iter().find(|(m, _)| *m == n).unwrap().1;
    for (hi, lo) in [("fig2", "fig3"), ("fig4", "fig5")] {
        let mut ok = true;
        let mut detail = Vec::new();
        for s in [Strategy::Rsma, Strategy::Sdma] {
            let a = curve(get(hi), s);
            let b = curve(get(lo), s);
            ok &= a.len() == b.len() && b.iter().zip(&a).all(|(x, y)| x <= y);
            detail.push(format!("{} alpha=0.8 {} alpha=0.6 {}", s.name(), fmt(&a), fmt(&b)));
        }
        rep.line(&format!("csit_ordering[{hi}>={lo}]"), ok, detail.join("; "));
    }
}

fn bound_consistency(rep: &mut Report, runs: &[&CampaignResult]) {
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for r in runs {
        for p in &r.points {
            worst = worst.max(p.mmf_throughput - p.shannon_bound);
            count += 1;
        }
    }
    rep.line(
        "throughput_below_bound",
        all_valid(runs) && worst <= BOUND_SLACK,
        format!("{count} points, max(throughput - bound) = {worst:.3} <= {BOUND_SLACK}"),
    );
}

fn bler_constraint(rep: &mut Report, name: &str, r: &CampaignResult) {
    let mut worst = 0.0f64;
    let mut violations = 0;
    for p in &r.points {
        worst = p.bler.iter().fold(worst, |a, b| a.max(*b));
        violations += usize::from(p.backoff_violation);
    }
    rep.line(
        &format!("bler_within_target[{name}]"),
        all_valid(&[r]) && violations == 0 && worst <= BLER_TARGET,
        format!(
            "{} points x {} realizations, max user BLER {worst:.3} <= {BLER_TARGET}, {violations} calibration violations",
            r.points.len(),
            r.num_realizations
        ),
    );
}

// -------------------------------------------------------------- coded chain

/// Every (alphabet, N, rN) the MCS rules can produce at S = 256 with a
/// nonempty payload, sent without noise through the full stream chain.
fn noiseless_chain(rep: &mut Report) {
    let amc = AmcConfig::default();
    let s = amc.stream_length;
    let mut combos = std::collections::BTreeSet::new();
    // rN is monotone in the rate, so scanning fine rate steps plus the
    // exact boundaries of every alphabet's range reaches all of them.
    for q in Modulation::ALL {
        let n = s * q.bits_per_symbol();
        for rn in 0..=n {
            let rate = rn as f64 / n as f64 * q.bits_per_symbol() as f64;
            for r in [rate - 1e-7, rate, rate + 1e-7] {
                let m = select_modulation(r, &amc);
                let p = code_params(r, m, s, amc.max_code_rate);
                if p.rate_bits > amc.crc.len() {
                    combos.insert((m.bits_per_symbol(), p.rate_bits));
                }
            }
        }
    }
    let mut rng = rng_from_seed(101);
    let mut failures = Vec::new();
    let mut per_alphabet = [0usize; 4];
    for &(bits, rate_bits) in &combos {
        let q = Modulation::from_bits_per_symbol(bits).unwrap();
        per_alphabet[bits / 2 - 1] += 1;
        let params = CodeParams {
            block_length: s * bits,
            rate_bits,
        };
        let mcs = StreamMcs {
            modulation: q,
            params,
            info_bits: rate_bits - amc.crc.len(),
            effective_rate: 0.0,
        };
        let spec = StreamSpec::new(q, mcs.polar_code(&amc).unwrap(), s, rng.gen()).unwrap();
        let msg = random_bits(&mut rng, mcs.info_bits);
        let frame = spec.encode(&msg).unwrap();
        let eq = Equalizer {
            weight: C64::new(1.0, 0.0),
            effective_gain: C64::new(1.0, 0.0),
            noise_var: 1e-6,
        };
        let out = spec.receive(&frame.symbols, &eq).unwrap().unwrap();
        if !(out.crc_pass && out.message == msg) {
            failures.push((bits, rate_bits));
        }
    }
    rep.line(
        "chain_noiseless_recovery",
        failures.is_empty(),
        format!(
            "{} combinations (4/16/64/256-QAM: {:?}), {} failed {:?}",
            combos.len(),
            per_alphabet,
            failures.len(),
            &failures[..failures.len().min(5)]
        ),
    );
}

fn polar_round_trips(rep: &mut Report) {
    let mut rng = rng_from_seed(102);
    let mut bad = 0;
    let trials = 200;
    for _ in 0..trials {
        let mother = 1usize << rng.gen_range(6..12);
        let n = rng.gen_range(mother / 2 + 1..=mother);
        let crc = if rng.gen_bool(0.5) { CrcSpec::CCITT16 } else { CrcSpec::NONE };
        let k = rng.gen_range(1..=n - crc.len());
        let list = [1, 2, 4, 8][rng.gen_range(0..4)];
        let code = PolarCodeConfig::new(n, k, crc, list, design_z_for_rate(k as f64 / n as f64)).unwrap();
        let msg = random_bits(&mut rng, k);
        let cw = code.encode(&msg).unwrap();
        let llrs: Vec<f64> = cw.bits.iter().map(|b| if *b == 0 { 8.0 } else { -8.0 }).collect();
        let out = code.decode(&llrs).unwrap();
        bad += usize::from(out.message != msg || !out.crc_pass);
    }
    rep.line(
        "polar_round_trip",
        bad == 0,
        format!("{trials} random codes (N from 33 to 2048, shortened, L in 1..8), {bad} mismatches"),
    );
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn llr_oracle(rep: &mut Report) {
    let mut rng = rng_from_seed(103);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for q in Modulation::ALL {
        let scheme = ModulationScheme::new(q);
        let m = q.bits_per_symbol();
        for _ in 0..INSTANCES {
            let gain = complex_gaussian(&mut rng, 1.0);
            let nv = 10f64.powf(rng.gen_range(-2.0..0.5));
            let s = scheme.points[rng.gen_range(0..scheme.points.len())];
            let y = gain * s + complex_gaussian(&mut rng, nv);
            let llrs = scheme.demodulate_llr(&[y], gain, nv);
            for b in 0..m {
                let (mut zero, mut one) = (Vec::new(), Vec::new());
                for (label, p) in scheme.points.iter().enumerate() {
                    let metric = -(y - gain * p).norm_sqr() / nv;
                    if (label >> (m - 1 - b)) & 1 == 0 {
                        zero.push(metric);
                    } else {
                        one.push(metric);
                    }
                }
                let exact = log_sum_exp(&zero) - log_sum_exp(&one);
                worst = worst.max((llrs[b] - exact).abs() / exact.abs().max(1.0));
                checked += 1;
            }
        }
    }
    rep.line(
        "llr_matches_brute_force",
        worst <= LLR_TOL,
        format!("{checked} bit LLRs over all alphabets, max scaled error {worst:.2e} <= {LLR_TOL:.0e}"),
    );
}

fn sic_residual(rep: &mut Report) {
    let mut rng = rng_from_seed(104);
    let amc = AmcConfig::default();
    let s = 64;
    let mut worst = 0.0f64;
    let mut decoded = 0;
    for t in 0..20u64 {
        let nt = 3;
        let m = 2;
        let mut set = random_set(&mut rng, nt, m);
        set.common *= C64::new(3.0, 0.0);
        let h = cgauss(&mut rng, nt);
        let code = |rate: f64, q: Modulation| {
            let n = s * q.bits_per_symbol();
            let k = (n as f64 * rate) as usize;
            PolarCodeConfig::new(n, k - amc.crc.len(), amc.crc, 8, design_z_for_rate(rate)).unwrap()
        };
        let common = StreamSpec::new(Modulation::Qam4, Some(code(0.3, Modulation::Qam4)), s, 2 * t).unwrap();
        let private = StreamSpec::new(Modulation::Qam16, Some(code(0.5, Modulation::Qam16)), s, 2 * t + 1).unwrap();
        let other = StreamSpec::new(Modulation::Qam4, Some(code(0.5, Modulation::Qam4)), s, 7).unwrap();
        let xc = common.encode(&random_bits(&mut rng, common.payload_bits())).unwrap().symbols;
        let x0 = private.encode(&random_bits(&mut rng, private.payload_bits())).unwrap().symbols;
        let x1 = other.encode(&random_bits(&mut rng, other.payload_bits())).unwrap().symbols;
        let (ac, a0, a1) = (inner(&h, &set.common), inner(&h, &set.private[0]), inner(&h, &set.private[1]));
        let ys: Vec<C64> = (0..s).map(|i| ac * xc[i] + a0 * x0[i] + a1 * x1[i]).collect();
        let out = sic_receive(&ys, &h, &set, 0, 1e-9, &common, &private).unwrap();
        let c = out.common.unwrap();
        if !c.crc_pass {
            continue;
        }
        decoded += 1;
        let energy: f64 = ys.iter().map(|y| y.norm_sqr()).sum();
        let residual: f64 = out
            .private_input
            .iter()
            .enumerate()
            .map(|(i, r)| (r - a0 * x0[i] - a1 * x1[i]).norm_sqr())
            .sum();
        worst = worst.max(residual / energy);
        // Same through the stand-alone canceller.
        let direct = cancel_common(&ys, &h, &set.common, &xc);
        let d: f64 = direct.iter().zip(&out.private_input).map(|(a, b)| (a - b).norm_sqr()).sum();
        worst = worst.max(d / energy);
    }
    rep.line(
        "sic_residual",
        decoded >= 15 && worst <= SIC_TOL,
        format!("{decoded}/20 common decodes, max residual/energy {worst:.2e} <= {SIC_TOL:.0e}"),
    );
}

fn mmse_stationarity(rep: &mut Report) {
    let mut rng = rng_from_seed(105);
    let mut worst_grad = 0.0f64;
    let mut worst_gap = f64::INFINITY;
    for _ in 0..INSTANCES {
        let nt = rng.gen_range(2..5);
        let m = rng.gen_range(1..4);
        let set = random_set(&mut rng, nt, m);
        let h = cgauss(&mut rng, nt);
        let nv = 10f64.powf(rng.gen_range(-2.0..1.0));
        let g = rng.gen_range(0..m);
        for (eq, signal, total) in [
            (equalize_common(&h, &set, nv), inner(&h, &set.common), common_denominator(&h, &set, nv)),
            (equalize_private(&h, &set, g, nv), inner(&h, &set.private[g]), private_denominator(&h, &set, nv)),
        ] {
            let f = |w: C64| mse(w, signal, total);
            let d = 1e-6 * eq.weight.norm().max(1e-3);
            let base = f(eq.weight);
            for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let plus = f(eq.weight + dir * d);
                let minus = f(eq.weight - dir * d);
                worst_grad = worst_grad.max(((plus - minus) / (2.0 * d)).abs() / total.max(1.0));
                worst_gap = worst_gap.min(plus.min(minus) - base);
            }
        }
    }
    rep.line(
        "mmse_stationary",
        worst_grad <= 1e-6 && worst_gap >= -1e-12,
        format!("{INSTANCES} instances x 2 equalizers, max |dMSE/dw| {worst_grad:.2e}, min MSE increase {worst_gap:.2e}"),
    );
}

// ----------------------------------------------------------------- formulas

/// SINRs, stream rates and group rates computed straight from the
/// definitions.
fn rates_by_hand(h: &CMatrix, set: &PrecoderSet, groups: &GroupMap, sigma2: f64) -> (Vec<f64>, Vec<f64>, f64, Vec<f64>, Vec<f64>) {
    let nt = h.nrows();
    let gain = |k: usize, p: &CVector| -> f64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for n in 0..nt {
            let a = h[(n, k)];
            let b = p[n];
            re += a.re * b.re + a.im * b.im;
            im += a.re * b.im - a.im * b.re;
        }
        re * re + im * im
    };
    let mut rc = Vec::new();
    let mut rp = Vec::new();
    for k in 0..h.ncols() {
        let own = groups.group_of(k);
        let mut others = 0.0;
        for (j, p) in set.private.iter().enumerate() {
            if j != own {
                others += gain(k, p);
            }
        }
        let own_gain = gain(k, &set.private[own]);
        rc.push((1.0 + gain(k, &set.common) / (own_gain + others + sigma2)).log2());
        rp.push((1.0 + own_gain / (others + sigma2)).log2());
    }
    let common = rc.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut r_m = vec![f64::INFINITY; groups.num_groups()];
    for k in 0..h.ncols() {
        let g = groups.group_of(k);
        r_m[g] = r_m[g].min(rp[k]);
    }
    let group_rates = r_m.iter().zip(&set.common_rate_split).map(|(r, c)| r + c).collect();
    (rc, rp, common, r_m, group_rates)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn oracle_rates(rep: &mut Report) {
    let mut rng = rng_from_seed(106);
    let mut worst = 0.0f64;
    let mut bad_flag = 0;
    for _ in 0..INSTANCES {
        let nt = rng.gen_range(1..7);
        let k = rng.gen_range(1..9);
        let m = rng.gen_range(1..=k);
        let groups = random_groups(&mut rng, k, m);
        let sigma2 = 10f64.powf(rng.gen_range(-2.0..1.0));
        let config = SystemConfig {
            num_tx_antennas: nt,
            groups: groups.clone(),
            power: PowerConstraintSet::sum_power(nt, 1.0),
            csit_alpha: 1.0,
            strategy: Strategy::Rsma,
            noise_variance: sigma2,
            perfect_csit: true,
        };
        let h = CMatrix::from_iterator(nt, k, (0..nt * k).map(|_| complex_gaussian(&mut rng, 1.0)));
        let set = random_set(&mut rng, nt, m);
        let r = evaluate_group_rates(&h, &set, &config).unwrap();
        let (rc, rp, common, r_m, group_rates) = rates_by_hand(&h, &set, &groups, sigma2);
        worst = worst
            .max(max_diff(&r.common_rates_per_user, &rc))
            .max(max_diff(&r.private_rates_per_user, &rp))
            .max((r.common_rate - common).abs())
            .max(max_diff(&r.group_private_rates, &r_m))
            .max(max_diff(&r.group_rates, &group_rates));
        let total: f64 = set.common_rate_split.iter().sum();
        bad_flag += usize::from(r.split_feasible() != (total <= common + 1e-12));
    }
    // Hand-derived values.
    let one = C64::new(1.0, 0.0);
    let e = |v: [f64; 3]| CVector::from_iterator(3, v.iter().map(|x| one * *x));
    let h = e([1.0, 1.0, 1.0]);
    let set = PrecoderSet {
        common: e([2.0, 0.0, 0.0]),
        private: vec![e([0.0, 1.0, 0.0]), e([0.0, 0.0, 1.0])],
        common_rate_split: vec![0.0, 0.0],
    };
    let g43 = rsma::sysmodel::sinr_common(&h, &set, 0, 1.0);
    let set2 = PrecoderSet {
        common: e([0.0, 0.0, 0.0]),
        private: vec![e([0.0, 2f64.sqrt(), 0.0]), e([0.0, 0.0, 1.0])],
        common_rate_split: vec![0.0, 0.0],
    };
    let g1 = rsma::sysmodel::sinr_private(&h, &set2, 0, 1.0);
    let derived_ok = (g43 - 4.0 / 3.0).abs() <= ORACLE_TOL && (g1 - 1.0).abs() <= ORACLE_TOL;
    rep.line(
        "oracle_sinr_and_group_rates",
        worst <= ORACLE_TOL && bad_flag == 0 && derived_ok,
        format!(
            "{INSTANCES} random systems, max deviation {worst:.2e} <= {ORACLE_TOL:.0e}; hand values 4/3 -> {g43}, 1 -> {g1}"
        ),
    );
}

fn oracle_power_and_superposition(rep: &mut Report) {
    let mut rng = rng_from_seed(107);
    let mut worst = 0.0f64;
    let mut wrong = 0;
    for _ in 0..INSTANCES {
        let nt = rng.gen_range(1..6);
        let m = rng.gen_range(1..4);
        let set = random_set(&mut rng, nt, m);
        let symbols: Vec<C64> = (0..=m).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let x = superpose(&set, &symbols).unwrap();
        for n in 0..nt {
            let mut v = set.common[n] * symbols[0];
            for j in 0..m {
                v += set.private[j][n] * symbols[j + 1];
            }
            worst = worst.max((x[n] - v).norm());
        }
        let limits: Vec<f64> = (0..nt).map(|_| rng.gen_range(0.5..8.0)).collect();
        let check = check_power(&set, &PowerConstraintSet::per_antenna(limits.clone()), 0.0);
        let mut all = true;
        for n in 0..nt {
            let mut used = set.common[n].norm_sqr();
            for p in &set.private {
                used += p[n].norm_sqr();
            }
            all &= used <= limits[n];
            worst = worst.max(((limits[n] - used) - check.slack[n]).abs());
        }
        wrong += usize::from(all != check.satisfied);
    }
    let one = C64::new(1.0, 0.0);
    let set = PrecoderSet {
        common: CVector::from_vec(vec![one, C64::default()]),
        private: vec![CVector::from_vec(vec![C64::default(), one])],
        common_rate_split: vec![0.0],
    };
    let x = superpose(&set, &[one, C64::new(0.0, 1.0)]).unwrap();
    let sum = check_power(&set, &PowerConstraintSet::sum_power(2, 2.0), 0.0);
    let per = check_power(&set, &PowerConstraintSet::per_antenna(vec![0.5, 0.5]), 0.0);
    let derived_ok = x == CVector::from_vec(vec![one, C64::new(0.0, 1.0)])
        && sum.satisfied
        && sum.slack == vec![0.0]
        && !per.satisfied
        && per.slack == vec![-0.5, -0.5];
    rep.line(
        "oracle_signal_and_power",
        worst <= ORACLE_TOL && wrong == 0 && derived_ok,
        format!("{INSTANCES} random sets, max deviation {worst:.2e}, {wrong} wrong verdicts, hand examples {derived_ok}"),
    );
}

fn oracle_mcs(rep: &mut Report) {
    let mut rng = rng_from_seed(108);
    let mut wrong = 0;
    for _ in 0..INSTANCES {
        let beta = rng.gen_range(0.3..=1.0);
        let amc = AmcConfig {
            max_code_rate: beta,
            ..AmcConfig::default()
        };
        let rate = rng.gen_range(0.0..10.0);
        let s = rng.gen_range(1..600usize);
        let need = (rate / beta).min(8.0);
        let bits = [2usize, 4, 6, 8].into_iter().find(|b| *b as f64 >= need).unwrap();
        let n = s * bits;
        let rn = (n as f64 * (rate / bits as f64).min(beta)).ceil() as usize;
        let q = select_modulation(rate, &amc);
        let p = code_params(rate, q, s, beta);
        wrong += usize::from(q.bits_per_symbol() != bits || p.block_length != n || p.rate_bits != rn);
    }
    let amc = AmcConfig::default();
    let hand = [(3.0, 4, 1024, 768), (8.0, 8, 2048, 1844), (0.5, 2, 512, 128)];
    let mut hand_ok = true;
    for (rate, bits, n, rn) in hand {
        let q = select_modulation(rate, &amc);
        let p = code_params(rate, q, 256, 0.9);
        hand_ok &= q.bits_per_symbol() == bits && p.block_length == n && p.rate_bits == rn;
    }
    rep.line(
        "oracle_modulation_and_code_rate",
        wrong == 0 && hand_ok,
        format!("{INSTANCES} random (R, S, beta), {wrong} mismatches; hand cases 16-QAM 768/1024, 256-QAM 1844/2048, 4-QAM 128/512: {hand_ok}"),
    );
}

fn oracle_throughput(rep: &mut Report) {
    let mut rng = rng_from_seed(109);
    let mut worst = 0.0f64;
    for _ in 0..INSTANCES {
        let k = rng.gen_range(1..10);
        let l = rng.gen_range(1..50);
        let s = rng.gen_range(1..1000usize);
        let records: Vec<RealizationRecord> = (0..l)
            .map(|i| {
                let bits: Vec<usize> = (0..k).map(|_| rng.gen_range(0..4000)).collect();
                RealizationRecord {
                    index: i as u64,
                    payload_bits: bits.clone(),
                    block_error: vec![false; k],
                    recovered_bits: bits,
                    common_ok: vec![None; k],
                    private_ok: vec![None; k],
                }
            })
            .collect();
        let mut best = u64::MAX;
        for u in 0..k {
            best = best.min(records.iter().map(|r| r.recovered_bits[u] as u64).sum());
        }
        let exact = best as f64 / (l * s) as f64;
        worst = worst.max((mmf_throughput(&records, s) - exact).abs());
    }
    let rec = |b: Vec<usize>| RealizationRecord {
        index: 0,
        payload_bits: b.clone(),
        block_error: vec![false; b.len()],
        common_ok: vec![None; b.len()],
        private_ok: vec![None; b.len()],
        recovered_bits: b,
    };
    let full: Vec<_> = (0..100).map(|_| rec(vec![512, 512])).collect();
    let hand_ok = mmf_throughput(&full, 256) == 2.0 && mmf_throughput(&[rec(vec![256, 512])], 256) == 1.0;
    rep.line(
        "oracle_mmf_throughput",
        worst <= ORACLE_TOL && hand_ok,
        format!("{INSTANCES} random logs, max deviation {worst:.2e}; hand cases 2.0 and 1.0: {hand_ok}"),
    );
}

// ---------------------------------------------------------------- optimizer

fn optimizer_sanity(rep: &mut Report) {
    let mut rng = rng_from_seed(110);
    let opt = OptimizerConfig {
        num_sample_channels: 200,
        max_iterations: 60,
        continuation_factors: vec![4.0],
        random_starts: 1,
        ..OptimizerConfig::default()
    };
    let mut issues = Vec::new();
    let mut gains = Vec::new();
    for i in 0..20 {
        let nt = rng.gen_range(2..5);
        let m = rng.gen_range(2..4);
        let config = SystemConfig {
            num_tx_antennas: nt,
            groups: GroupMap::uniform(m, 2).unwrap(),
            power: PowerConstraintSet::sum_power(nt, 10f64.powf(rng.gen_range(0.5..3.0))),
            csit_alpha: rng.gen_range(0.5..1.0),
            strategy: Strategy::Rsma,
            noise_variance: 1.0,
            perfect_csit: false,
        };
        let h = CMatrix::from_iterator(nt, 2 * m, (0..nt * 2 * m).map(|_| complex_gaussian(&mut rng, 1.0)));
        let seed = rng.gen();
        let rs = optimize_mmf(&h, &config, &opt, seed).unwrap();
        let sd = optimize_mmf(&h, &config, &OptimizerConfig { strategy: Strategy::Sdma, ..opt.clone() }, seed).unwrap();
        let base = rs.sdma_baseline.as_ref().map(|b| b.report.mmf_value);
        if rs.report.mmf_value < sd.report.mmf_value {
            issues.push(format!("#{i} rsma {} < sdma {}", rs.report.mmf_value, sd.report.mmf_value));
        }
        if base != Some(sd.report.mmf_value) {
            issues.push(format!("#{i} baseline {base:?} != sdma {}", sd.report.mmf_value));
        }
        for (name, sol) in [("rsma", &rs), ("sdma", &sd)] {
            if !check_power(&sol.precoders, &config.power, 1e-6).satisfied {
                issues.push(format!("#{i} {name} breaks the power budget"));
            }
            if sol.trace.windows(2).any(|w| w[1] < w[0]) {
                issues.push(format!("#{i} {name} objective decreased"));
            }
            let split: f64 = sol.precoders.common_rate_split.iter().sum();
            if split > sol.report.common_rate + 1e-9 {
                issues.push(format!("#{i} {name} split exceeds the common rate"));
            }
        }
        if !sd.precoders.is_sdma() {
            issues.push(format!("#{i} sdma solution carries a common stream"));
        }
        gains.push(rs.report.mmf_value - sd.report.mmf_value);
    }
    let mean_gain = gains.iter().sum::<f64>() / gains.len() as f64;
    rep.line(
        "optimizer_sanity",
        issues.is_empty(),
        format!(
            "20 instances: rsma >= sdma, feasible, monotone SCA; mean rsma gain {mean_gain:.3} bps/Hz{}",
            if issues.is_empty() { String::new() } else { format!("; {}", issues.join("; ")) }
        ),
    );
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut rep = Report { failures: 0 };

    oracle_rates(&mut rep);
    oracle_power_and_superposition(&mut rep);
    oracle_mcs(&mut rep);
    oracle_throughput(&mut rep);
    llr_oracle(&mut rep);
    polar_round_trips(&mut rep);
    noiseless_chain(&mut rep);
    sic_residual(&mut rep);
    mmse_stationarity(&mut rep);
    optimizer_sanity(&mut rep);
    saturation(&mut rep);

    let ci: Vec<(&str, CampaignResult)> = ["fig2", "fig3", "fig4", "fig5"]
        .into_iter()
        .map(|n| (n, run(&ci_scale(preset(n).unwrap()))))
        .collect();
    dominance(&mut rep, &ci);
    alpha_ordering(&mut rep, &ci);

    let cellular = run(&preset("fig4").unwrap());
    bler_constraint(&mut rep, "fig4", &cellular);
    let mut sat = preset("fig6").unwrap();
    sat.operating_points = vec![10.0, 20.0, 30.0];
    let satellite = run(&sat);
    bler_constraint(&mut rep, "fig6", &satellite);

    let mut all: Vec<&CampaignResult> = ci.iter().map(|(_, r)| r).collect();
    all.extend([&cellular, &satellite]);
    bound_consistency(&mut rep, &all);

    println!(
        "acceptance: {} failed, {:.0?} elapsed",
        rep.failures,
        start.elapsed()
    );
    if rep.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
