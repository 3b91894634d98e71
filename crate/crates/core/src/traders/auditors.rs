//! Auditor traders. Each keeps the features it built for earlier days so that day n reuses
//! them; the recursions (holdings, β) live entirely inside the feature DAG.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use num_traits::{One, Signed};

use super::{SentenceSeq, StepMeter, Trader, TraderContext, TraderError};
use crate::feature::{Direction, Feature, TradingStrategy};
use crate::logic::{decides, DeductivePrefix, LogicError, Sentence};
use crate::rational::{self, Rational};

fn single(n: usize, s: &Sentence, coef: Feature) -> TradingStrategy {
    let mut c = BTreeMap::new();
    c.insert(s.clone(), coef);
    TradingStrategy::new(n, c).expect("auditor coefficients never read past their day")
}

/// Always the zero strategy.
pub struct ZeroTrader;

impl Trader for ZeroTrader {
    fn name(&self) -> String {
        "zero".into()
    }

    fn generate(
        &self,
        n: usize,
        _ctx: &TraderContext<'_>,
        _meter: &mut StepMeter,
    ) -> Result<TradingStrategy, TraderError> {
        Ok(TradingStrategy::zero(n))
    }
}

/// Buys a constant number of shares of one sentence every day from `start` on.
pub struct BuyTrader {
    pub phi: Sentence,
    pub amount: Rational,
    pub start: usize,
}

impl Trader for BuyTrader {
    fn name(&self) -> String {
        format!("buy({}, {})", self.phi, self.amount)
    }

    fn generate(
        &self,
        n: usize,
        _ctx: &TraderContext<'_>,
        meter: &mut StepMeter,
    ) -> Result<TradingStrategy, TraderError> {
        meter.charge(1)?;
        if n < self.start {
            return Ok(TradingStrategy::zero(n));
        }
        Ok(TradingStrategy::buy(
            n,
            self.phi.clone(),
            self.amount.clone(),
        ))
    }
}

/// Buys φ below p − ε/2 and sells above p + ε/2, keeping its share count H[φ] inside [0, 1]:
/// T_n[φ] = (1 − H_{n−1})·Ind_{ε/2}(φ^{*n} < p − ε/2) − H_{n−1}·Ind_{ε/2}(φ^{*n} > p + ε/2),
/// with T_1 = H_1 = 0.
pub struct ConvergenceTrader {
    phi: Sentence,
    p: Rational,
    eps: Rational,
    /// holdings[i] = H_{i+1}[φ]; trades[i] = T_{i+1}[φ].
    state: Mutex<(Vec<Feature>, Vec<Feature>)>,
}

impl ConvergenceTrader {
    pub fn new(
        phi: Sentence,
        p: Rational,
        eps: Rational,
    ) -> Result<ConvergenceTrader, TraderError> {
        if !eps.is_positive() || (&p - &eps).is_negative() || &p + &eps > Rational::one() {
            return Err(TraderError::Parameter(format!(
                "need 0 < eps, 0 ≤ p − eps, p + eps ≤ 1 (p = {p}, eps = {eps})"
            )));
        }
        Ok(ConvergenceTrader {
            phi,
            p,
            eps,
            state: Mutex::new((Vec::new(), Vec::new())),
        })
    }

    fn extend(&self, n: usize) {
        let mut st = self.state.lock().unwrap();
        let (holdings, trades) = &mut *st;
        let half = &self.eps * rational::half();
        while holdings.len() < n {
            let m = holdings.len() + 1;
            let t = if m == 1 {
                Feature::zero()
            } else {
                let h_prev = &holdings[m - 2];
                let price = Feature::price(self.phi.clone(), m);
                let low = Feature::constant(&self.p - &half);
                let high = Feature::constant(&self.p + &half);
                let buy =
                    Feature::ind(&half, &price, &low, Direction::Less).expect("positive width");
                let sell =
                    Feature::ind(&half, &price, &high, Direction::Greater).expect("positive width");
                Feature::sub(
                    &Feature::product(&Feature::sub(&Feature::one(), h_prev), &buy),
                    &Feature::product(h_prev, &sell),
                )
            };
            let h = if m == 1 {
                Feature::zero()
            } else {
                // H stays in [0, 1] exactly; the clamp only tells the interval bound.
                Feature::sum(&holdings[m - 2], &t).clamp01()
            };
            trades.push(t);
            holdings.push(h);
        }
    }

    /// H_n[φ] as a feature of rank ≤ n.
    pub fn holdings(&self, n: usize) -> Feature {
        self.extend(n);
        self.state.lock().unwrap().0[n - 1].clone()
    }

    pub fn trade(&self, n: usize) -> Feature {
        self.extend(n);
        self.state.lock().unwrap().1[n - 1].clone()
    }
}

impl Trader for ConvergenceTrader {
    fn name(&self) -> String {
        format!("convergence({}, p={}, eps={})", self.phi, self.p, self.eps)
    }

    fn generate(
        &self,
        n: usize,
        _ctx: &TraderContext<'_>,
        meter: &mut StepMeter,
    ) -> Result<TradingStrategy, TraderError> {
        meter.charge(3)?;
        Ok(single(n, &self.phi, self.trade(n)))
    }
}

/// One of the four Gaifman coherence auditors, trading only after day `start`:
/// 1 buys φ, 2 sells φ, 3 buys φ∨ψ against φ and ψ, 4 is the negation of 3.
pub struct CoherenceTrader {
    which: u8,
    phi: Sentence,
    psi: Option<Sentence>,
    start: usize,
}

impl CoherenceTrader {
    pub fn new(
        which: u8,
        phi: Sentence,
        psi: Option<Sentence>,
        start: usize,
    ) -> Result<CoherenceTrader, TraderError> {
        if !(1..=4).contains(&which) {
            return Err(TraderError::Parameter(format!(
                "coherence auditor index {which} is not in 1..=4"
            )));
        }
        if which >= 3 && psi.is_none() {
            return Err(TraderError::Parameter(
                "coherence auditors 3 and 4 need psi".into(),
            ));
        }
        if start < 1 {
            return Err(TraderError::Parameter(
                "start day must be at least 1".into(),
            ));
        }
        Ok(CoherenceTrader {
            which,
            phi,
            psi,
            start,
        })
    }
}

impl Trader for CoherenceTrader {
    fn name(&self) -> String {
        match &self.psi {
            Some(psi) => format!(
                "coherence{}({}, {}, s={})",
                self.which, self.phi, psi, self.start
            ),
            None => format!("coherence{}({}, s={})", self.which, self.phi, self.start),
        }
    }

    fn generate(
        &self,
        n: usize,
        _ctx: &TraderContext<'_>,
        meter: &mut StepMeter,
    ) -> Result<TradingStrategy, TraderError> {
        meter.charge(3)?;
        if n <= self.start {
            return Ok(TradingStrategy::zero(n));
        }
        let one = Rational::one();
        let t = match self.which {
            1 => TradingStrategy::buy(n, self.phi.clone(), one),
            2 => TradingStrategy::buy(n, self.phi.clone(), -one),
            _ => {
                let psi = self.psi.clone().expect("checked at construction");
                let sign = if self.which == 3 { one } else { -one };
                let or = TradingStrategy::buy(n, self.phi.clone().or(psi.clone()), sign.clone());
                let parts = TradingStrategy::buy(n, self.phi.clone(), -sign.clone())
                    .add(&TradingStrategy::buy(n, psi, -sign))?;
                or.add(&parts)?
            }
        };
        Ok(t)
    }
}

/// Buys up to one share of φ at each price level 2^-k:
/// β^k_k = 0, β^k_i = Ind_{2^{-k-1}}(φ^{*i} < 2^{-k})·(1 − Σ_{j=k}^{i−1} β^k_j), and
/// T_i[φ] = Σ_{k≤i} β^k_i.
pub struct NondogmatismTrader {
    phi: Sentence,
    /// beta[i-1][k-1] = β^k_i, sums[k-1] = Σ_{j=k}^{last} β^k_j, trades[i-1] = T_i[φ].
    state: Mutex<NondogState>,
}

#[derive(Default)]
struct NondogState {
    beta: Vec<Vec<Feature>>,
    sums: Vec<Feature>,
    trades: Vec<Feature>,
}

impl NondogmatismTrader {
    pub fn new(phi: Sentence) -> NondogmatismTrader {
        NondogmatismTrader {
            phi,
            state: Mutex::new(NondogState::default()),
        }
    }

    fn extend(&self, n: usize) {
        let mut st = self.state.lock().unwrap();
        while st.trades.len() < n {
            let i = st.trades.len() + 1;
            let price = Feature::price(self.phi.clone(), i);
            let mut row = Vec::with_capacity(i);
            for k in 1..i {
                let width = rational::pow2(-(k as i64) - 1);
                let level = Feature::constant(rational::pow2(-(k as i64)));
                let ind =
                    Feature::ind(&width, &price, &level, Direction::Less).expect("positive width");
                let b = Feature::product(&ind, &Feature::sub(&Feature::one(), &st.sums[k - 1]));
                st.sums[k - 1] = Feature::sum(&st.sums[k - 1], &b).clamp01();
                row.push(b);
            }
            row.push(Feature::zero());
            st.sums.push(Feature::zero());
            let t = row
                .iter()
                .fold(Feature::zero(), |acc, b| Feature::sum(&acc, b));
            st.beta.push(row);
            st.trades.push(t);
        }
    }

    /// β^k_i for k ≤ i.
    pub fn beta(&self, k: usize, i: usize) -> Feature {
        self.extend(i);
        self.state.lock().unwrap().beta[i - 1][k - 1].clone()
    }

    pub fn trade(&self, i: usize) -> Feature {
        self.extend(i);
        self.state.lock().unwrap().trades[i - 1].clone()
    }
}

impl Trader for NondogmatismTrader {
    fn name(&self) -> String {
        format!("nondogmatism({})", self.phi)
    }

    fn generate(
        &self,
        n: usize,
        _ctx: &TraderContext<'_>,
        meter: &mut StepMeter,
    ) -> Result<TradingStrategy, TraderError> {
        meter.charge(3 * n as u64)?;
        Ok(single(n, &self.phi, self.trade(n)))
    }
}

/// MO(φ, n): false ("closed") iff some m ≤ n has D_m deciding φ with an enumeration of at
/// most n assignments. Monotone: once closed, closed for every later day.
pub fn maybe_open(
    phi: &Sentence,
    n: usize,
    prefix: &DeductivePrefix,
    cap: usize,
) -> Result<bool, LogicError> {
    let focus = phi.atoms();
    for m in 1..=n.min(prefix.len()) {
        let d = prefix.get(m);
        if d.projection_cost(&focus, cap)? <= n as u64 && decides(d, phi, cap)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Buys the sequence φ_n when it looks cheap, holding at most one unit of still-open shares:
/// β_1 = 0, β_n = 1 − Σ_{i<n} MO(φ_i, n)·T_i[φ_i], T_n[φ_n] = β_n·Ind_{ε/2}(φ_n^{*n} < p − ε/2).
/// MO values are computed while generating and enter the features as constants.
pub struct PseudorandomTrader {
    seq: SentenceSeq,
    p: Rational,
    eps: Rational,
    state: Mutex<PrState>,
}

#[derive(Default)]
struct PrState {
    phis: Vec<Sentence>,
    betas: Vec<Feature>,
    trades: Vec<Feature>,
    /// Memo of MO(φ, n) = false: the first day each sentence was seen closed.
    closed: HashMap<Sentence, usize>,
}

impl PseudorandomTrader {
    pub fn new(
        seq: SentenceSeq,
        p: Rational,
        eps: Rational,
    ) -> Result<PseudorandomTrader, TraderError> {
        if !eps.is_positive() {
            return Err(TraderError::Parameter(format!(
                "eps must be positive, got {eps}"
            )));
        }
        Ok(PseudorandomTrader {
            seq,
            p,
            eps,
            state: Mutex::new(PrState::default()),
        })
    }

    fn is_open(
        st: &mut PrState,
        phi: &Sentence,
        n: usize,
        ctx: &TraderContext<'_>,
    ) -> Result<bool, TraderError> {
        if let Some(&day) = st.closed.get(phi) {
            if day <= n {
                return Ok(false);
            }
        }
        let open = maybe_open(phi, n, ctx.prefix, ctx.atom_cap)?;
        if !open {
            st.closed.insert(phi.clone(), n);
        }
        Ok(open)
    }

    fn extend(&self, n: usize, ctx: &TraderContext<'_>) -> Result<(), TraderError> {
        let mut st = self.state.lock().unwrap();
        if st.trades.len() >= n {
            return Ok(());
        }
        ctx.require_day(n)?;
        let half = &self.eps * rational::half();
        while st.trades.len() < n {
            let m = st.trades.len() + 1;
            let phi = self.seq.get(m)?;
            let beta = if m == 1 {
                Feature::zero()
            } else {
                let mut open_total = Feature::zero();
                for i in 1..m {
                    let phi_i = st.phis[i - 1].clone();
                    if Self::is_open(&mut st, &phi_i, m, ctx)? {
                        open_total = Feature::sum(&open_total, &st.trades[i - 1]);
                    }
                }
                Feature::sub(&Feature::one(), &open_total)
            };
            let price = Feature::price(phi.clone(), m);
            let ind = Feature::ind(
                &half,
                &price,
                &Feature::constant(&self.p - &half),
                Direction::Less,
            )
            .expect("positive width");
            let t = if m == 1 {
                Feature::zero()
            } else {
                Feature::product(&beta, &ind)
            };
            st.phis.push(phi);
            st.betas.push(beta);
            st.trades.push(t);
        }
        Ok(())
    }

    pub fn beta(&self, n: usize, ctx: &TraderContext<'_>) -> Result<Feature, TraderError> {
        self.extend(n, ctx)?;
        Ok(self.state.lock().unwrap().betas[n - 1].clone())
    }

    pub fn trade(
        &self,
        n: usize,
        ctx: &TraderContext<'_>,
    ) -> Result<(Sentence, Feature), TraderError> {
        self.extend(n, ctx)?;
        let st = self.state.lock().unwrap();
        Ok((st.phis[n - 1].clone(), st.trades[n - 1].clone()))
    }
}

impl Trader for PseudorandomTrader {
    fn name(&self) -> String {
        format!("pseudorandom({}, p={}, eps={})", self.seq, self.p, self.eps)
    }

    fn generate(
        &self,
        n: usize,
        ctx: &TraderContext<'_>,
        meter: &mut StepMeter,
    ) -> Result<TradingStrategy, TraderError> {
        meter.charge(2 * n as u64)?;
        let (phi, t) = self.trade(n, ctx)?;
        if t.is_zero() {
            return Ok(TradingStrategy::zero(n));
        }
        Ok(single(n, &phi, t))
    }
}
