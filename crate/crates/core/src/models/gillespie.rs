//! Direct-method stochastic simulation of continuous-time Markov jump processes.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};

/// A Markov jump process with a fixed number of event channels.
pub trait JumpProcess {
    type State: Clone;

    fn n_events(&self) -> usize;

    /// Writes the rate of every event channel at `state` into `rates`.
    fn rates(&self, state: &Self::State, rates: &mut [f64]);

    fn apply(&self, state: &mut Self::State, event: usize);
}

/// Advances `state` from `t0` to `t1` in place.
///
/// The clock is memoryless, so stopping at `t1` and restarting later from the
/// same state is distributionally exact.
pub fn advance<P: JumpProcess, R: Rng + ?Sized>(
    process: &P,
    state: &mut P::State,
    t0: f64,
    t1: f64,
    rates: &mut [f64],
    rng: &mut R,
) -> Result<()> {
    let mut t = t0;
    loop {
        process.rates(state, rates);
        let mut total = 0.0;
        for &r in rates.iter() {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::ModelDefinition(format!("event rate {r} is negative or non-finite")));
            }
            total += r;
        }
        if total == 0.0 {
            return Ok(());
        }
        let wait: f64 = rng.sample::<f64, _>(Exp1) / total;
        t += wait;
        if t >= t1 {
            return Ok(());
        }
        let mut target = rng.random::<f64>() * total;
        let mut event = rates.len() - 1;
        for (e, &r) in rates.iter().enumerate() {
            if target < r {
                event = e;
                break;
            }
            target -= r;
        }
        // Guard against a zero-rate channel picked through rounding at the tail.
        while rates[event] == 0.0 && event > 0 {
            event -= 1;
        }
        process.apply(state, event);
    }
}

/// Exact simulation from `initial` at time 0, returning the state at every
/// record time. Once the total rate is zero the state stays frozen.
pub fn gillespie_simulate<P: JumpProcess, R: Rng + ?Sized>(
    process: &P,
    initial: P::State,
    record_times: &[f64],
    rng: &mut R,
) -> Result<Vec<P::State>> {
    if record_times.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::InvalidDesign("record times must be non-negative".into()));
    }
    if record_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidDesign("record times must be sorted".into()));
    }
    let mut rates = vec![0.0; process.n_events()];
    let mut state = initial;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(record_times.len());
    for &r in record_times {
        advance(process, &mut state, t, r, &mut rates, rng)?;
        t = r;
        out.push(state.clone());
    }
    Ok(out)
}
