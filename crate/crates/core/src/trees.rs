//! Labelled rooted trees: an independent oracle for the series coefficients.
//!
//! Trees are plane trees (children ordered). With ordered children the sum of
//! tree values over a fixed order and root momentum reproduces the recursion
//! exactly, each ordered product `y_{k₁}⊛…⊛y_{k_p}` being one tree.
//!
//! Enumeration is memoized by order: the trees of order `k` are built from
//! the stored trees of all lower orders, so every subtree is shared.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::rc::Rc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{FourierSeries, Mode};
use crate::model::Problem;
use crate::solver::degenerate::{alpha_min, divisor_v, propagators};
use crate::solver::nondegenerate::propagator_d;
use crate::solver::SeriesSolution;
use crate::frequency::DEFAULT_LATTICE_BUDGET;

/// Cap on the number of stored trees across all orders.
pub const DEFAULT_TREE_BUDGET: usize = 1_000_000;
/// Relative tolerance of the oracle comparison.
pub const ORACLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    N1,
    N3,
}

impl Scheme {
    pub fn for_method(method: &str) -> Result<Scheme> {
        match method {
            "n1" => Ok(Scheme::N1),
            "n3" => Ok(Scheme::N3),
            other => Err(Error::UnknownSolver(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    End {
        mode: Mode,
    },
    Internal {
        /// `d_v`; always 1 in the n3 scheme.
        degree_label: u8,
        momentum: Mode,
        children: Vec<Rc<Node>>,
    },
}

impl Node {
    pub fn momentum(&self) -> &Mode {
        match self {
            Node::End { mode } => mode,
            Node::Internal { momentum, .. } => momentum,
        }
    }

    pub fn is_end(&self) -> bool {
        matches!(self, Node::End { .. })
    }

    /// `|N|`.
    pub fn order(&self) -> usize {
        match self {
            Node::End { .. } => 1,
            Node::Internal { children, .. } => 1 + children.iter().map(|c| c.order()).sum::<usize>(),
        }
    }

    pub fn end_count(&self) -> usize {
        match self {
            Node::End { .. } => 1,
            Node::Internal { children, .. } => children.iter().map(|c| c.end_count()).sum(),
        }
    }

    pub fn internal_count(&self) -> usize {
        self.order() - self.end_count()
    }

    /// Ordered encoding; two plane trees are equal iff encodings match.
    pub fn encoding(&self) -> String {
        let mut s = String::new();
        self.encode_into(&mut s, false);
        s
    }

    /// Encoding with children sorted, i.e. of the class under child
    /// permutation.
    pub fn unordered_encoding(&self) -> String {
        let mut s = String::new();
        self.encode_into(&mut s, true);
        s
    }

    fn encode_into(&self, out: &mut String, sorted: bool) {
        match self {
            Node::End { mode } => {
                let _ = write!(out, "E[{mode}]");
            }
            Node::Internal {
                degree_label, children, ..
            } => {
                let mut parts: Vec<String> = children
                    .iter()
                    .map(|c| {
                        let mut s = String::new();
                        c.encode_into(&mut s, sorted);
                        s
                    })
                    .collect();
                if sorted {
                    parts.sort();
                }
                let _ = write!(out, "V{degree_label}({})", parts.join(","));
            }
        }
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        f(self);
        if let Node::Internal { children, .. } = self {
            for c in children {
                c.visit(f);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    pub scheme: Scheme,
    pub root: Rc<Node>,
}

impl Tree {
    pub fn order(&self) -> usize {
        self.root.order()
    }

    pub fn momentum(&self) -> &Mode {
        self.root.momentum()
    }

    pub fn encoding(&self) -> String {
        self.root.encoding()
    }

    /// Indented text, one node per line.
    pub fn dump(&self) -> String {
        fn go(node: &Node, depth: usize, out: &mut String) {
            let pad = "  ".repeat(depth);
            match node {
                Node::End { mode } => {
                    let _ = writeln!(out, "{pad}end mode={mode} momentum={mode}");
                }
                Node::Internal {
                    degree_label,
                    momentum,
                    children,
                } => {
                    let _ = writeln!(out, "{pad}internal p={} d={degree_label} momentum={momentum}", children.len());
                    for c in children {
                        go(c, depth + 1, out);
                    }
                }
            }
        }
        let mut out = String::new();
        go(&self.root, 0, &mut out);
        out
    }

    /// Re-checks momentum conservation and the scheme constraints.
    pub fn validate(&self, min_degree: usize) -> Result<()> {
        fn go(node: &Node, scheme: Scheme, min_degree: usize) -> Result<Mode> {
            match node {
                Node::End { mode } => Ok(mode.clone()),
                Node::Internal {
                    degree_label,
                    momentum,
                    children,
                } => {
                    if children.len() < min_degree {
                        return Err(Error::InvalidTree(format!("node with {} children", children.len())));
                    }
                    let mut sum = Mode::zero(momentum.dim());
                    for c in children {
                        sum = sum.add(&go(c, scheme, min_degree)?);
                    }
                    if &sum != momentum {
                        return Err(Error::InvalidTree(format!("momentum {momentum} but children sum to {sum}")));
                    }
                    match scheme {
                        Scheme::N1 => {
                            if (*degree_label == 0) != momentum.is_zero() {
                                return Err(Error::InvalidTree(format!("d_v={degree_label} with momentum {momentum}")));
                            }
                        }
                        Scheme::N3 => {
                            if momentum.is_zero() {
                                return Err(Error::InvalidTree("internal exit line with zero momentum".into()));
                            }
                            if is_excluded(children) {
                                return Err(Error::InvalidTree("excluded node".into()));
                            }
                        }
                    }
                    Ok(sum)
                }
            }
        }
        go(&self.root, self.scheme, min_degree).map(|_| ())
    }
}

/// One internal child and end children whose modes sum to zero.
fn is_excluded(children: &[Rc<Node>]) -> bool {
    let internal = children.iter().filter(|c| !c.is_end()).count();
    if internal != 1 {
        return false;
    }
    let dim = children[0].momentum().dim();
    let end_sum = children
        .iter()
        .filter(|c| c.is_end())
        .fold(Mode::zero(dim), |acc, c| acc.add(c.momentum()));
    end_sum.is_zero()
}

/// What to enumerate: scheme, admissible node degrees and end-node modes.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeFamily {
    pub scheme: Scheme,
    pub dim: usize,
    /// Admissible `p_v`, increasing.
    pub degrees: Vec<usize>,
    pub end_modes: Vec<Mode>,
    pub budget: usize,
}

impl TreeFamily {
    /// Trees contributing to the coefficients: degrees with `a_p ≠ 0`, end
    /// modes with nonzero node factor.
    pub fn for_oracle(problem: &Problem, scheme: Scheme, zeta: f64, max_order: usize) -> TreeFamily {
        let nl = &problem.nonlinearity;
        let min_p = min_degree(problem, scheme);
        let degrees = (min_p..max_order.max(min_p)).filter(|&p| nl.a_p(p) != 0.0).collect();
        let mut end_modes: Vec<Mode> = problem.forcing.modes().filter(|m| !m.is_zero()).cloned().collect();
        if scheme == Scheme::N3 && zeta != 0.0 {
            end_modes.push(Mode::zero(problem.dim()));
        }
        TreeFamily {
            scheme,
            dim: problem.dim(),
            degrees,
            end_modes,
            budget: DEFAULT_TREE_BUDGET,
        }
    }

    /// All trees allowed by the scheme, irrespective of coefficient values.
    pub fn structural(problem: &Problem, scheme: Scheme, max_order: usize) -> TreeFamily {
        let min_p = min_degree(problem, scheme);
        let mut end_modes: Vec<Mode> = problem.forcing.modes().filter(|m| !m.is_zero()).cloned().collect();
        if scheme == Scheme::N3 {
            end_modes.push(Mode::zero(problem.dim()));
        }
        TreeFamily {
            scheme,
            dim: problem.dim(),
            degrees: (min_p..max_order.max(min_p)).collect(),
            end_modes,
            budget: DEFAULT_TREE_BUDGET,
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }
}

fn min_degree(problem: &Problem, scheme: Scheme) -> usize {
    match scheme {
        Scheme::N1 => 2,
        Scheme::N3 => problem.nonlinearity.order,
    }
}

/// Memoized enumeration; `by_order[k]` maps root momentum to trees of order `k`.
pub struct TreeEnumerator {
    family: TreeFamily,
    by_order: Vec<BTreeMap<Mode, Vec<Rc<Node>>>>,
    stored: usize,
}

impl TreeEnumerator {
    pub fn new(family: TreeFamily) -> Self {
        TreeEnumerator {
            family,
            by_order: vec![BTreeMap::new()],
            stored: 0,
        }
    }

    pub fn family(&self) -> &TreeFamily {
        &self.family
    }

    /// Number of trees stored so far, all orders.
    pub fn stored(&self) -> usize {
        self.stored
    }

    /// All trees of order `k`, keyed by root momentum.
    pub fn trees_of_order(&mut self, k: usize) -> Result<&BTreeMap<Mode, Vec<Rc<Node>>>> {
        while self.by_order.len() <= k {
            let next = self.by_order.len();
            let level = self.build_level(next)?;
            self.by_order.push(level);
        }
        Ok(&self.by_order[k])
    }

    /// Trees of order `k` with root momentum `nu`.
    pub fn enumerate(&mut self, k: usize, nu: &Mode) -> Result<Vec<Tree>> {
        let scheme = self.family.scheme;
        Ok(self
            .trees_of_order(k)?
            .get(nu)
            .map(|v| v.iter().map(|r| Tree { scheme, root: r.clone() }).collect())
            .unwrap_or_default())
    }

    fn build_level(&mut self, k: usize) -> Result<BTreeMap<Mode, Vec<Rc<Node>>>> {
        let mut level: BTreeMap<Mode, Vec<Rc<Node>>> = BTreeMap::new();
        if k == 1 {
            for m in &self.family.end_modes {
                level.entry(m.clone()).or_default().push(Rc::new(Node::End { mode: m.clone() }));
            }
        } else {
            for &p in &self.family.degrees {
                if p > k - 1 {
                    break;
                }
                let mut children = Vec::with_capacity(p);
                self.extend_children(p, k - 1, &mut children, &mut level)?;
            }
        }
        self.stored += level.values().map(Vec::len).sum::<usize>();
        if self.stored > self.family.budget {
            return Err(Error::TreeBudgetExceeded(format!(
                "{} trees up to order {k} exceed the budget {}",
                self.stored, self.family.budget
            )));
        }
        Ok(level)
    }

    /// Fills the remaining `p − children.len()` slots with total order `left`.
    fn extend_children(
        &self,
        p: usize,
        left: usize,
        children: &mut Vec<Rc<Node>>,
        level: &mut BTreeMap<Mode, Vec<Rc<Node>>>,
    ) -> Result<()> {
        let slots = p - children.len();
        if slots == 0 {
            if left == 0 {
                self.close_node(children, level)?;
            }
            return Ok(());
        }
        // every remaining slot needs order ≥ 1
        for kc in 1..=(left + 1 - slots) {
            for trees in self.by_order[kc].values() {
                for t in trees {
                    children.push(t.clone());
                    self.extend_children(p, left - kc, children, level)?;
                    children.pop();
                }
            }
        }
        Ok(())
    }

    fn close_node(&self, children: &[Rc<Node>], level: &mut BTreeMap<Mode, Vec<Rc<Node>>>) -> Result<()> {
        let momentum = children
            .iter()
            .fold(Mode::zero(self.family.dim), |acc, c| acc.add(c.momentum()));
        let degree_label = match self.family.scheme {
            Scheme::N1 => u8::from(!momentum.is_zero()),
            Scheme::N3 => {
                if momentum.is_zero() || is_excluded(children) {
                    return Ok(());
                }
                1
            }
        };
        level.entry(momentum.clone()).or_default().push(Rc::new(Node::Internal {
            degree_label,
            momentum,
            children: children.to_vec(),
        }));
        if self.stored + level.values().map(Vec::len).sum::<usize>() > self.family.budget {
            return Err(Error::TreeBudgetExceeded(format!(
                "more than {} trees while building order {}",
                self.family.budget,
                children.iter().map(|c| c.order()).sum::<usize>() + 1
            )));
        }
        Ok(())
    }
}

/// Data the tree values depend on.
#[derive(Debug, Clone)]
pub struct TreeContext<'a> {
    pub problem: &'a Problem,
    pub scheme: Scheme,
    /// n3 only.
    pub zeta: f64,
    /// n3 only.
    pub b: f64,
}

impl<'a> TreeContext<'a> {
    pub fn n1(problem: &'a Problem) -> Self {
        TreeContext {
            problem,
            scheme: Scheme::N1,
            zeta: 0.0,
            b: 0.0,
        }
    }

    pub fn n3(problem: &'a Problem, zeta: f64, b: f64) -> Self {
        TreeContext {
            problem,
            scheme: Scheme::N3,
            zeta,
            b,
        }
    }

    /// Context matching a solver output.
    pub fn for_solution(problem: &'a Problem, solution: &SeriesSolution) -> Result<Self> {
        match Scheme::for_method(solution.method)? {
            Scheme::N1 => Ok(TreeContext::n1(problem)),
            Scheme::N3 => {
                let d = solution
                    .degenerate
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("n3 solution without ζ/b summary".into()))?;
                Ok(TreeContext::n3(problem, d.zeta, d.b))
            }
        }
    }
}

/// `Val(θ, ε)`: product of node factors and propagators.
pub fn tree_value(tree: &Tree, ctx: &TreeContext) -> Result<Complex64> {
    if tree.scheme != ctx.scheme {
        return Err(Error::InvalidTree("tree scheme differs from the context".into()));
    }
    node_value(&tree.root, ctx)
}

fn node_value(node: &Node, ctx: &TreeContext) -> Result<Complex64> {
    let p = ctx.problem;
    let eps = p.epsilon;
    let s = |m: &Mode| p.omega.dot(m);
    let guard = |d: Complex64, m: &Mode| -> Result<Complex64> {
        if d.norm() == 0.0 {
            return Err(Error::ResonantDivisor {
                mode: m.0.clone(),
                magnitude: 0.0,
            });
        }
        Ok(d.inv())
    };
    match (node, ctx.scheme) {
        (Node::End { mode }, Scheme::N1) => {
            if mode.is_zero() {
                return Err(Error::InvalidTree("zero mode label in the n1 scheme".into()));
            }
            let g = guard(propagator_d(eps, s(mode), p.nonlinearity.a), mode)?;
            Ok(p.forcing.get(mode) * eps * g)
        }
        (Node::End { mode }, Scheme::N3) => {
            if mode.is_zero() {
                return Ok(Complex64::new(eps * ctx.zeta, 0.0));
            }
            let (ge, _) = propagators(eps, s(mode), ctx.b, p.nonlinearity.order)?;
            Ok(p.forcing.get(mode) * eps * ge)
        }
        (
            Node::Internal {
                degree_label,
                momentum,
                children,
            },
            scheme,
        ) => {
            let mut prod = Complex64::new(1.0, 0.0);
            for c in children {
                prod *= node_value(c, ctx)?;
            }
            let ap = p.nonlinearity.a_p(children.len());
            match scheme {
                Scheme::N1 => {
                    let (factor, g) = if momentum.is_zero() {
                        (-ap, Complex64::new(1.0 / p.nonlinearity.a, 0.0))
                    } else {
                        (-ap * eps, guard(propagator_d(eps, s(momentum), p.nonlinearity.a), momentum)?)
                    };
                    if (*degree_label == 0) != momentum.is_zero() {
                        return Err(Error::InvalidTree(format!("d_v={degree_label} with momentum {momentum}")));
                    }
                    Ok(prod * factor * g)
                }
                Scheme::N3 => {
                    if momentum.is_zero() {
                        return Err(Error::InvalidTree("internal exit line with zero momentum".into()));
                    }
                    let g = guard(divisor_v(eps, s(momentum), ctx.b, p.nonlinearity.order), momentum)?;
                    Ok(prod * (-eps * ap) * g)
                }
            }
        }
    }
}

/// Sum of tree values per root momentum for order `k`.
pub fn tree_sum(enumerator: &mut TreeEnumerator, k: usize, ctx: &TreeContext) -> Result<FourierSeries> {
    let scheme = enumerator.family().scheme;
    let dim = enumerator.family().dim;
    let mut out = FourierSeries::zero(dim);
    for (nu, trees) in enumerator.trees_of_order(k)? {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in trees {
            acc += tree_value(&Tree { scheme, root: t.clone() }, ctx)?;
        }
        out.add_at(nu.clone(), acc);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleEntry {
    pub k: usize,
    pub nu: Mode,
    pub recursion: [f64; 2],
    pub tree_sum: [f64; 2],
    pub trees: usize,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub scheme: Scheme,
    pub k_max: usize,
    pub entries: Vec<OracleEntry>,
    pub max_rel_error: f64,
    pub trees_enumerated: usize,
    pub pass: bool,
}

/// `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_error(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Compares the solver's coefficients with tree sums for orders `1..=k_max`.
pub fn oracle_compare(problem: &Problem, solution: &SeriesSolution, k_max: usize, budget: usize) -> Result<OracleReport> {
    let ctx = TreeContext::for_solution(problem, solution)?;
    let k_max = k_max.min(solution.order());
    let family = TreeFamily::for_oracle(problem, ctx.scheme, ctx.zeta, k_max).with_budget(budget);
    let mut en = TreeEnumerator::new(family);
    let mut entries = Vec::new();
    for k in 1..=k_max {
        let sums = tree_sum(&mut en, k, &ctx)?;
        let counts: BTreeMap<Mode, usize> = en.trees_of_order(k)?.iter().map(|(m, v)| (m.clone(), v.len())).collect();
        let rec = solution.coefficient(k);
        let mut modes: Vec<Mode> = rec.modes().chain(sums.modes()).cloned().collect();
        modes.sort();
        modes.dedup();
        for nu in modes {
            let (a, b) = (rec.get(&nu), sums.get(&nu));
            entries.push(OracleEntry {
                k,
                trees: counts.get(&nu).copied().unwrap_or(0),
                rel_error: relative_error(a, b),
                recursion: [a.re, a.im],
                tree_sum: [b.re, b.im],
                nu,
            });
        }
    }
    let max_rel_error = entries.iter().map(|e| e.rel_error).fold(0.0, f64::max);
    Ok(OracleReport {
        scheme: ctx.scheme,
        k_max,
        entries,
        max_rel_error,
        trees_enumerated: en.stored(),
        pass: max_rel_error <= ORACLE_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub statement: &'static str,
    pub checked: usize,
    pub equality_cases: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub scheme: Scheme,
    pub k_max: usize,
    pub trees_checked: usize,
    /// Threshold α of the small-divisor lines (n3 only).
    pub alpha: Option<f64>,
    /// Trees with at least one node in `V₀` (n3 only).
    pub trees_with_small_divisors: usize,
    pub checks: Vec<LemmaCheck>,
    /// Descriptions of the first few violations.
    pub examples: Vec<String>,
}

impl LemmaReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.violations == 0)
    }

    pub fn total_violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }
}

struct Counter {
    check: LemmaCheck,
}

impl Counter {
    fn new(name: &'static str, statement: &'static str) -> Self {
        Counter {
            check: LemmaCheck {
                name,
                statement,
                checked: 0,
                equality_cases: 0,
                violations: 0,
            },
        }
    }

    /// Records `lhs ≥ rhs`.
    fn ge(&mut self, lhs: i64, rhs: i64) -> bool {
        self.check.checked += 1;
        if lhs == rhs {
            self.check.equality_cases += 1;
        }
        let ok = lhs >= rhs;
        if !ok {
            self.check.violations += 1;
        }
        ok
    }

    fn holds(&mut self, ok: bool) -> bool {
        self.check.checked += 1;
        if !ok {
            self.check.violations += 1;
        }
        ok
    }
}

/// Exhaustively checks the counting lemmas over all structurally admissible
/// trees of order `1..=k_max` built from the problem's forcing support.
pub fn check_lemmas(problem: &Problem, scheme: Scheme, k_max: usize, budget: usize) -> Result<LemmaReport> {
    let n = problem.nonlinearity.order as i64;
    let family = TreeFamily::structural(problem, scheme, k_max).with_budget(budget);
    let mut en = TreeEnumerator::new(family);
    let alpha = match scheme {
        Scheme::N3 => Some(alpha_min(problem, DEFAULT_LATTICE_BUDGET)?),
        Scheme::N1 => None,
    };
    let mut examples = Vec::new();
    let mut counters = match scheme {
        Scheme::N1 => vec![
            Counter::new("lemma-2.3", "|E| ≥ |V| + 1"),
            Counter::new("lemma-2.3-equality", "|E| = |V| + 1 iff every p_v = 2"),
            Counter::new("corollary-2.5", "2|E| ≥ k + 1"),
        ],
        Scheme::N3 => vec![
            Counter::new("lemma-3.5", "|E| ≥ (𝔫−1)|V| + 1"),
            Counter::new("corollary-3.6", "𝔫|E| ≥ (𝔫−1)k + 1"),
            Counter::new("lemma-3.7", "𝔫|V₀| ≤ |E| − 2 when |V| ≥ 1"),
            Counter::new("remark-3.2", "no trees of order 2..𝔫"),
        ],
    };
    let mut trees_checked = 0;
    let mut trees_with_small_divisors = 0;
    for k in 1..=k_max {
        let level = en.trees_of_order(k)?;
        if scheme == Scheme::N3 && (2..=n as usize).contains(&k) {
            counters[3].holds(level.is_empty());
        }
        for root in level.values().flatten() {
            trees_checked += 1;
            let (mut e, mut v, mut v0, mut all_binary) = (0i64, 0i64, 0i64, true);
            root.visit(&mut |node| match node {
                Node::End { .. } => e += 1,
                Node::Internal { momentum, children, .. } => {
                    v += 1;
                    all_binary &= children.len() == 2;
                    if let Some(a) = alpha {
                        if problem.omega.dot(momentum).abs() < a / 2.0 {
                            v0 += 1;
                        }
                    }
                }
            });
            let kk = e + v;
            if v0 > 0 {
                trees_with_small_divisors += 1;
            }
            let mut ok = true;
            match scheme {
                Scheme::N1 => {
                    ok &= counters[0].ge(e, v + 1);
                    ok &= counters[1].holds((e == v + 1) == all_binary);
                    ok &= counters[2].ge(2 * e, kk + 1);
                }
                Scheme::N3 => {
                    ok &= counters[0].ge(e, (n - 1) * v + 1);
                    ok &= counters[1].ge(n * e, (n - 1) * kk + 1);
                    if v >= 1 {
                        ok &= counters[2].ge(e - 2, n * v0);
                    }
                }
            }
            if !ok && examples.len() < 5 {
                examples.push(root.encoding());
            }
        }
    }
    Ok(LemmaReport {
        scheme,
        k_max,
        trees_checked,
        alpha,
        trees_with_small_divisors,
        checks: counters.into_iter().map(|c| c.check).collect(),
        examples,
    })
}
