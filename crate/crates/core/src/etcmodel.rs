//! Closed-loop event-triggered systems, their extended error dynamics and the
//! homogenized form obtained by adding a dummy variable `w`.
//!
//! Variable layout of the plain model: states, then errors, then
//! disturbances. The homogenized model inserts `w` after the errors.

use crate::symkernel::{
    parse_poly, var_list, verify_nonpositive, Expr, IntervalBox, KernelError, Polynomial,
    SearchLimits, VarList, Verdict,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("{what}: expected {expected}, found {found}")]
    Arity {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("the origin must lie in the interior of the state box")]
    OriginNotInterior,
    #[error("the triggering function must not depend on disturbance `{0}`")]
    TriggerUsesDisturbance(String),
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("heartbeat must be positive, got {0}")]
    BadHeartbeat(f64),
    #[error("triggering function is not negative at zero error at {point:?} (value {value})")]
    TriggerNotNegative { point: Vec<f64>, value: f64 },
    #[error("could not certify the triggering function negative on the state box")]
    TriggerUncertified,
    #[error("in {field}: {source}")]
    Parse {
        field: String,
        #[source]
        source: KernelError,
    },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("internal error: {0}")]
    Internal(String),
}

/// Textual description of a model, as read from a configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub states: Vec<String>,
    /// Defaults to `e_<state>` for every state.
    pub errors: Option<Vec<String>>,
    pub disturbances: Vec<String>,
    /// Closed-loop right-hand sides, one per state.
    pub field: Vec<String>,
    pub trigger: String,
    pub disturbance_lo: Vec<f64>,
    pub disturbance_hi: Vec<f64>,
    pub state_lo: Vec<f64>,
    pub state_hi: Vec<f64>,
    pub heartbeat: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EtcModel {
    n: usize,
    vars: VarList,
    f_closed: Vec<Polynomial>,
    trigger: Polynomial,
    delta_box: Option<IntervalBox>,
    state_box: IntervalBox,
    heartbeat: Option<f64>,
}

impl EtcModel {
    /// `f_closed` and `trigger` must be expressed over `vars`, which holds
    /// `n` states, `n` errors and then the disturbances.
    pub fn new(
        vars: VarList,
        n: usize,
        f_closed: Vec<Polynomial>,
        trigger: Polynomial,
        delta_box: Option<IntervalBox>,
        state_box: IntervalBox,
        heartbeat: Option<f64>,
    ) -> Result<Self, ModelError> {
        let nd = delta_box.as_ref().map_or(0, |b| b.dim());
        if vars.len() != 2 * n + nd {
            return Err(ModelError::Arity {
                what: "variables",
                expected: 2 * n + nd,
                found: vars.len(),
            });
        }
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(ModelError::DuplicateVariable(v.clone()));
            }
        }
        if f_closed.len() != n {
            return Err(ModelError::Arity {
                what: "field components",
                expected: n,
                found: f_closed.len(),
            });
        }
        if state_box.dim() != n {
            return Err(ModelError::Arity {
                what: "state box dimensions",
                expected: n,
                found: state_box.dim(),
            });
        }
        if !state_box.dims().iter().all(|d| d.lo() < 0.0 && d.hi() > 0.0) {
            return Err(ModelError::OriginNotInterior);
        }
        if let Some(h) = heartbeat {
            if !(h > 0.0 && h.is_finite()) {
                return Err(ModelError::BadHeartbeat(h));
            }
        }
        for p in f_closed.iter().chain(std::iter::once(&trigger)) {
            if p.vars() != &vars {
                return Err(ModelError::Internal(
                    "polynomial expressed over a different variable list".into(),
                ));
            }
        }
        for (j, name) in vars[2 * n..].iter().enumerate() {
            let mut mask = vec![false; vars.len()];
            mask[2 * n + j] = true;
            if trigger.degree_in(&mask) > 0 {
                return Err(ModelError::TriggerUsesDisturbance(name.clone()));
            }
        }
        Ok(Self {
            n,
            vars,
            f_closed,
            trigger,
            delta_box,
            state_box,
            heartbeat,
        })
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self, ModelError> {
        let n = spec.states.len();
        let errors = match &spec.errors {
            Some(e) => e.clone(),
            None => spec.states.iter().map(|s| format!("e_{s}")).collect(),
        };
        if errors.len() != n {
            return Err(ModelError::Arity {
                what: "error variables",
                expected: n,
                found: errors.len(),
            });
        }
        let names: Vec<String> = spec
            .states
            .iter()
            .chain(&errors)
            .chain(&spec.disturbances)
            .cloned()
            .collect();
        let vars = var_list(&names);
        let parse = |field: String, text: &str| {
            parse_poly(text, &vars).map_err(|source| ModelError::Parse { field, source })
        };
        let f_closed = spec
            .field
            .iter()
            .enumerate()
            .map(|(i, t)| parse(format!("field[{i}]"), t))
            .collect::<Result<Vec<_>, _>>()?;
        let trigger = parse("trigger".into(), &spec.trigger)?;
        let delta_box = if spec.disturbances.is_empty() {
            None
        } else {
            let b = IntervalBox::from_bounds(&spec.disturbance_lo, &spec.disturbance_hi)?;
            if b.dim() != spec.disturbances.len() {
                return Err(ModelError::Arity {
                    what: "disturbance bounds",
                    expected: spec.disturbances.len(),
                    found: b.dim(),
                });
            }
            Some(b)
        };
        let state_box = IntervalBox::from_bounds(&spec.state_lo, &spec.state_hi)?;
        Self::new(vars, n, f_closed, trigger, delta_box, state_box, spec.heartbeat)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of disturbance variables.
    pub fn nd(&self) -> usize {
        self.vars.len() - 2 * self.n
    }

    pub fn vars(&self) -> &VarList {
        &self.vars
    }

    pub fn state_names(&self) -> &[String] {
        &self.vars[..self.n]
    }

    pub fn f_closed(&self) -> &[Polynomial] {
        &self.f_closed
    }

    pub fn trigger(&self) -> &Polynomial {
        &self.trigger
    }

    pub fn delta_box(&self) -> Option<&IntervalBox> {
        self.delta_box.as_ref()
    }

    pub fn is_perturbed(&self) -> bool {
        self.delta_box.is_some()
    }

    pub fn state_box(&self) -> &IntervalBox {
        &self.state_box
    }

    pub fn heartbeat(&self) -> Option<f64> {
        self.heartbeat
    }

    /// Value of the triggering function at state `x` with zero error.
    pub fn trigger_at_zero_error(&self, x: &[f64]) -> f64 {
        let mut z = vec![0.0; self.vars.len()];
        z[..self.n].copy_from_slice(x);
        self.trigger.eval(&z)
    }

    /// Spot-check that `φ(x, 0) < 0` at every given point.
    pub fn check_trigger_points(&self, points: &[Vec<f64>]) -> Result<(), ModelError> {
        for x in points {
            let value = self.trigger_at_zero_error(x);
            if !(value < 0.0) {
                return Err(ModelError::TriggerNotNegative {
                    point: x.clone(),
                    value,
                });
            }
        }
        Ok(())
    }

    /// Certify `φ(x, 0) < 0` on the whole state box by branch-and-bound.
    pub fn verify_trigger_negative(&self, limits: SearchLimits) -> Result<(), ModelError> {
        let n = self.n;
        let mut restricted = self.trigger.clone();
        for i in n..self.vars.len() {
            restricted = restricted.substitute(i, 0.0);
        }
        // Substituted variables have exponent zero everywhere, so mapping
        // them onto the first state leaves the terms unchanged.
        let mapping: Vec<usize> = (0..self.vars.len()).map(|i| if i < n { i } else { 0 }).collect();
        let restricted = restricted.embed(var_list(self.state_names()), &mapping);
        let margin = 1e-12 * restricted.coefficient_l1().max(1.0);
        let e = Expr::poly(&(&restricted + &Polynomial::constant(restricted.vars().clone(), margin)));
        match verify_nonpositive(&e, &self.state_box, limits) {
            Verdict::Proved => Ok(()),
            Verdict::Refuted(x) => Err(ModelError::TriggerNotNegative {
                value: self.trigger_at_zero_error(&x),
                point: x,
            }),
            Verdict::Unknown(_) => Err(ModelError::TriggerUncertified),
        }
    }

    /// A copy of this model without disturbance inputs, obtained by fixing
    /// every disturbance variable to zero.
    pub fn nominal(&self) -> EtcModel {
        let n = self.n;
        let vars: VarList = var_list(&self.vars[..2 * n]);
        let drop = |p: &Polynomial| {
            let mut q = p.clone();
            for i in 2 * n..self.vars.len() {
                q = q.substitute(i, 0.0);
            }
            let mapping: Vec<usize> = (0..self.vars.len()).map(|i| i.min(2 * n - 1)).collect();
            q.embed(vars.clone(), &mapping)
        };
        EtcModel {
            n,
            vars: vars.clone(),
            f_closed: self.f_closed.iter().map(drop).collect(),
            trigger: drop(&self.trigger),
            delta_box: None,
            state_box: self.state_box.clone(),
            heartbeat: self.heartbeat,
        }
    }
}

/// The extended field `f_e = (f, −f)` over `(ζ, ε)`.
pub fn build_extended(m: &EtcModel) -> Vec<Polynomial> {
    m.f_closed
        .iter()
        .cloned()
        .chain(m.f_closed.iter().map(|p| -p))
        .collect()
}

#[derive(Debug, Clone)]
pub struct HomogenizedModel {
    n: usize,
    nd: usize,
    vars: VarList,
    f_tilde: Vec<Polynomial>,
    phi_tilde: Polynomial,
    alpha: u32,
    theta: u32,
}

fn homogenize_poly(p: &Polynomial, vars: &VarList, w: usize, mask: &[bool], deg: u32) -> Polynomial {
    let n_old = p.nvars();
    let mut q = Polynomial::zero(vars.clone());
    for (m, c) in p.terms() {
        let k = Polynomial::monomial_degree(m, &mask[..n_old]);
        let mut nm = vec![0u32; vars.len()];
        for (i, &e) in m.iter().enumerate() {
            let j = if i < w { i } else { i + 1 };
            nm[j] = e;
        }
        nm[w] = deg - k;
        q.add_term(nm, c);
    }
    q
}

/// Homogenize the extended field and the triggering function. Degrees count
/// state, error and `w` exponents; disturbance variables enter with degree
/// zero.
pub fn homogenize(m: &EtcModel, f_e: &[Polynomial], w_name: &str) -> Result<HomogenizedModel, ModelError> {
    let n = m.n;
    let nd = m.nd();
    if m.vars.iter().any(|v| v == w_name) {
        return Err(ModelError::DuplicateVariable(w_name.to_string()));
    }
    let mut names: Vec<String> = m.vars[..2 * n].to_vec();
    names.push(w_name.to_string());
    names.extend_from_slice(&m.vars[2 * n..]);
    let vars = var_list(&names);
    let w = 2 * n;
    let mask: Vec<bool> = (0..m.vars.len()).map(|i| i < 2 * n).collect();

    let fdeg = f_e.iter().map(|p| p.degree_in(&mask)).max().unwrap_or(0);
    let alpha = fdeg.saturating_sub(1).max(1);
    let tdeg = m.trigger.degree_in(&mask);
    let theta = tdeg.saturating_sub(1).max(1);

    let mut f_tilde: Vec<Polynomial> = f_e
        .iter()
        .map(|p| homogenize_poly(p, &vars, w, &mask, alpha + 1))
        .collect();
    f_tilde.push(Polynomial::zero(vars.clone()));
    let phi_tilde = homogenize_poly(&m.trigger, &vars, w, &mask, theta + 1);

    let hm = HomogenizedModel {
        n,
        nd,
        vars,
        f_tilde,
        phi_tilde,
        alpha,
        theta,
    };
    if !hm.degrees_consistent() {
        return Err(ModelError::Internal("homogenization degree audit failed".into()));
    }
    Ok(hm)
}

impl HomogenizedModel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nd(&self) -> usize {
        self.nd
    }

    /// `(ζ, ε, w, d)`.
    pub fn vars(&self) -> &VarList {
        &self.vars
    }

    /// Index of `w` in [`Self::vars`].
    pub fn w_index(&self) -> usize {
        2 * self.n
    }

    /// `2n + 1` components; the last one (for `w`) is zero.
    pub fn f_tilde(&self) -> &[Polynomial] {
        &self.f_tilde
    }

    pub fn phi_tilde(&self) -> &Polynomial {
        &self.phi_tilde
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn theta(&self) -> u32 {
        self.theta
    }

    /// Mask selecting the variables that count towards homogeneous degree.
    pub fn degree_mask(&self) -> Vec<bool> {
        (0..self.vars.len()).map(|i| i <= 2 * self.n).collect()
    }

    /// Whether every monomial of `p` has degree exactly `deg`.
    pub fn is_homogeneous(&self, p: &Polynomial, deg: u32) -> bool {
        let mask = self.degree_mask();
        p.terms()
            .all(|(m, _)| Polynomial::monomial_degree(m, &mask) == deg)
    }

    fn degrees_consistent(&self) -> bool {
        self.f_tilde.iter().all(|p| self.is_homogeneous(p, self.alpha + 1))
            && self.is_homogeneous(&self.phi_tilde, self.theta + 1)
    }

    /// `L⁰φ̃, …, Lᵖφ̃` along `f̃`. With disturbances present only the first
    /// derivative is meaningful, so `p` is capped at 1.
    pub fn lie_chain(&self, p: usize) -> Vec<Polynomial> {
        let p = if self.nd > 0 { p.min(1) } else { p };
        let mut chain = vec![self.phi_tilde.clone()];
        for _ in 0..p {
            let next = chain.last().unwrap().lie_derivative(&self.f_tilde);
            chain.push(next);
        }
        chain
    }
}
