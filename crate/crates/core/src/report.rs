//! Plain-text report writers. Numbers use 17 significant digits and all
//! iteration is over ordered maps, so equal inputs give identical bytes.

use std::fmt::Write as _;

use crate::frequency::DiophantineReport;
use crate::solver::SeriesSolution;
use crate::trees::{LemmaReport, OracleReport};
use crate::verify::{AttractorReport, ResidualReport};

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), num)
}

pub fn diagnose(report: &DiophantineReport) -> String {
    let mut out = String::from("# diophantine diagnostics (l1 lattice norm)\n");
    let _ = writeln!(out, "n_max = {}", report.n_max);
    let _ = writeln!(out, "n alpha_n beta_n epsilon_n");
    for n in 0..=report.n_max as usize {
        let _ = writeln!(
            out,
            "{n} {} {} {}",
            num(report.alpha[n]),
            opt(report.beta[n]),
            opt(report.epsilon_seq[n])
        );
    }
    let _ = writeln!(out, "bryuno_partial = {}", num(report.bryuno_partial));
    let _ = writeln!(out, "epsilon_decreasing = {}", report.epsilon_decreasing);
    out
}

/// One line per stored coefficient: `k nu re im`.
pub fn coefficients(solution: &SeriesSolution) -> String {
    let mut out = String::from("# k nu re im\n");
    for (i, series) in solution.orders.iter().enumerate() {
        for (nu, c) in series.iter() {
            let _ = writeln!(out, "{} {} {} {}", i + 1, nu, num(c.re), num(c.im));
        }
    }
    out
}

pub fn scalars(solution: &SeriesSolution) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "method = {}", solution.method);
    let _ = writeln!(out, "epsilon = {}", num(solution.epsilon));
    let _ = writeln!(out, "order = {}", solution.order());
    let _ = writeln!(out, "c0 = {}", num(solution.c0));
    let _ = writeln!(out, "mu_radius_estimate = {}", num(solution.mu_radius_estimate));
    let _ = writeln!(out, "radius_warning = {}", solution.radius_warning);
    if let Some(d) = &solution.degenerate {
        let _ = writeln!(out, "zeta = {}", num(d.zeta));
        let _ = writeln!(out, "zeta0 = {}", num(d.zeta0));
        let _ = writeln!(out, "b = {}", num(d.b));
        let _ = writeln!(out, "b0 = {}", num(d.b0));
        let _ = writeln!(out, "alpha_min = {}", opt(d.alpha_min));
        let _ = writeln!(out, "f2_residual = {}", num(d.f2_residual));
        let _ = writeln!(out, "iterations = {}", d.iterations);
    }
    out
}

pub fn residual(report: &ResidualReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "grid_size = {}", report.grid_size);
    let _ = writeln!(out, "sup_residual = {}", num(report.sup_residual));
    let _ = writeln!(out, "fourier_sup = {}", num(report.fourier_sup));
    let _ = writeln!(out, "consistency = {}", num(report.consistency));
    let _ = writeln!(out, "l1_bound = {}", num(report.l1_bound));
    let _ = writeln!(out, "# nu re im");
    for (nu, c) in report.per_mode_residual.iter() {
        let _ = writeln!(out, "{nu} {} {}", num(c.re), num(c.im));
    }
    out
}

pub fn oracle(report: &OracleReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scheme = {:?}", report.scheme);
    let _ = writeln!(out, "k_max = {}", report.k_max);
    let _ = writeln!(out, "trees_enumerated = {}", report.trees_enumerated);
    let _ = writeln!(out, "max_rel_error = {}", num(report.max_rel_error));
    let _ = writeln!(out, "pass = {}", report.pass);
    let _ = writeln!(out, "# k nu trees recursion_re recursion_im tree_re tree_im rel_error");
    for e in &report.entries {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            e.k,
            e.nu,
            e.trees,
            num(e.recursion[0]),
            num(e.recursion[1]),
            num(e.tree_sum[0]),
            num(e.tree_sum[1]),
            num(e.rel_error)
        );
    }
    out
}

pub fn lemmas(report: &LemmaReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scheme = {:?}", report.scheme);
    let _ = writeln!(out, "k_max = {}", report.k_max);
    let _ = writeln!(out, "trees_checked = {}", report.trees_checked);
    let _ = writeln!(out, "alpha = {}", opt(report.alpha));
    let _ = writeln!(out, "trees_with_small_divisors = {}", report.trees_with_small_divisors);
    let _ = writeln!(out, "# name checked equality_cases violations statement");
    for c in &report.checks {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            c.name, c.checked, c.equality_cases, c.violations, c.statement
        );
    }
    for e in &report.examples {
        let _ = writeln!(out, "violation {e}");
    }
    let _ = writeln!(out, "pass = {}", report.pass());
    out
}

pub fn attractor(report: &AttractorReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "t_end = {}", num(report.t_end));
    let _ = writeln!(out, "dt = {}", num(report.dt));
    let _ = writeln!(out, "exploratory = {}", report.exploratory);
    let _ = writeln!(out, "shadowing_distance = {}", num(report.shadowing_distance));
    let _ = writeln!(out, "# offset terminal_distance decay_rate pass");
    for e in &report.entries {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            num(e.offset),
            num(e.terminal_distance),
            opt(e.decay_rate),
            e.pass
        );
    }
    let _ = writeln!(out, "pass = {}", report.pass);
    out
}
