//! Optional recording of the penalty and decay schedules the solvers walk
//! through, used to check them against the prescribed doubling rules.

/// One schedule step, carrying the parameter value in effect at that step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceEvent {
    /// Intensity penalty used for an `a`-update.
    Beta(f64),
    /// Gradient penalty used for a `b`/`x` update.
    Mu1(f64),
    /// Framelet penalty used for a `c`-update.
    Mu2(f64),
    /// Kernel-split penalty used for a `d`/Bregman/`k` update.
    Mu3(f64),
    /// Image regularization weight after a decay step.
    Gamma1(f64),
    /// l1 weight after a decay step.
    Alpha(f64),
    /// Start of a pyramid level (its index, coarsest = 0).
    Level(usize),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverTrace {
    pub events: Vec<TraceEvent>,
}

impl SolverTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, e: TraceEvent) {
        self.events.push(e);
    }

    /// Values of one event kind, in order.
    pub fn values(&self, pick: impl Fn(&TraceEvent) -> Option<f64>) -> Vec<f64> {
        self.events.iter().filter_map(pick).collect()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.values(|e| if let TraceEvent::Beta(v) = e { Some(*v) } else { None })
    }

    pub fn mu1s(&self) -> Vec<f64> {
        self.values(|e| if let TraceEvent::Mu1(v) = e { Some(*v) } else { None })
    }

    pub fn mu2s(&self) -> Vec<f64> {
        self.values(|e| if let TraceEvent::Mu2(v) = e { Some(*v) } else { None })
    }

    pub fn mu3s(&self) -> Vec<f64> {
        self.values(|e| if let TraceEvent::Mu3(v) = e { Some(*v) } else { None })
    }

    pub fn gamma1s(&self) -> Vec<f64> {
        self.values(|e| if let TraceEvent::Gamma1(v) = e { Some(*v) } else { None })
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.values(|e| if let TraceEvent::Alpha(v) = e { Some(*v) } else { None })
    }
}

/// Records into an optional trace.
pub(crate) fn record(trace: &mut Option<&mut SolverTrace>, e: TraceEvent) {
    if let Some(t) = trace.as_deref_mut() {
        t.push(e);
    }
}
