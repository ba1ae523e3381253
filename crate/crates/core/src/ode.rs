//! Dormand–Prince 8(5,3) explicit Runge–Kutta integrator with step-size
//! control and 7th-order dense output, for fixed-size real state vectors.

use crate::error::{Error, Result};

/// Right-hand side `dy/dt = f(t, y)`.
///
/// Returning `Err` marks the evaluation point as unusable (for example a
/// trajectory that landed on a nodal point); the integrator rejects the
/// step and retries with a smaller one.
pub trait System<const D: usize> {
    fn rhs(&mut self, t: f64, y: &[f64; D], dy: &mut [f64; D]) -> Result<()>;
}

impl<const D: usize, F> System<D> for F
where
    F: FnMut(f64, &[f64; D], &mut [f64; D]),
{
    fn rhs(&mut self, t: f64, y: &[f64; D], dy: &mut [f64; D]) -> Result<()> {
        self(t, y, dy);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub initial_step: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_step: 1.0,
            min_step: 1e-12,
            initial_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

pub struct Dop853<const D: usize> {
    control: StepControl,
    max_step_cap: f64,
    t: f64,
    y: [f64; D],
    h: f64,
    t_old: f64,
    y_old: [f64; D],
    h_old: f64,
    /// Stage derivatives; slot `j` holds stage `j + 1`. Slot 0 is always
    /// `f(t, y)` at the current point.
    k: [[f64; D]; 16],
    cont: [[f64; D]; 8],
    dense_ready: bool,
    initialized: bool,
    last_rejected: bool,
    stats: StepStats,
}

impl<const D: usize> Dop853<D> {
    pub fn new(t0: f64, y0: [f64; D], control: StepControl) -> Self {
        Self {
            control,
            max_step_cap: control.max_step,
            t: t0,
            y: y0,
            h: control.initial_step.unwrap_or(0.0),
            t_old: t0,
            y_old: y0,
            h_old: 0.0,
            k: [[0.0; D]; 16],
            cont: [[0.0; D]; 8],
            dense_ready: false,
            initialized: false,
            last_rejected: false,
            stats: StepStats::default(),
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; D] {
        &self.y
    }

    pub fn t_prev(&self) -> f64 {
        self.t_old
    }

    pub fn y_prev(&self) -> &[f64; D] {
        &self.y_old
    }

    /// Derivative at the current point (valid after the first step).
    pub fn derivative(&self) -> &[f64; D] {
        &self.k[0]
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    /// Temporarily caps the step size below the configured maximum.
    pub fn set_step_cap(&mut self, cap: f64) {
        self.max_step_cap = cap.min(self.control.max_step).max(self.control.min_step);
    }

    /// Restarts from a new state at the current time, keeping the step size
    /// as the initial guess.
    pub fn reset(&mut self, t: f64, y: [f64; D]) {
        self.t = t;
        self.y = y;
        self.t_old = t;
        self.y_old = y;
        self.initialized = false;
        self.dense_ready = false;
        self.last_rejected = false;
    }

    fn eval<S: System<D>>(&mut self, sys: &mut S, t: f64, y: &[f64; D], slot: usize) -> Result<()> {
        self.stats.evaluations += 1;
        let mut out = [0.0; D];
        sys.rhs(t, y, &mut out)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        self.k[slot] = out;
        Ok(())
    }

    fn initialize<S: System<D>>(&mut self, sys: &mut S) -> Result<()> {
        let (t, y) = (self.t, self.y);
        self.eval(sys, t, &y, 0)?;
        if self.h <= 0.0 {
            self.h = self.initial_step_guess(sys)?;
        }
        self.h = self.h.min(self.max_step_cap).max(self.control.min_step);
        self.initialized = true;
        Ok(())
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.control.abs_tol + self.control.rel_tol * a.abs().max(b.abs())
    }

    /// Starting step from the local Lipschitz estimate (Hairer's heuristic).
    fn initial_step_guess<S: System<D>>(&mut self, sys: &mut S) -> Result<f64> {
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for i in 0..D {
            let sk = self.scale(self.y[i], self.y[i]);
            dnf += (self.k[0][i] / sk).powi(2);
            dny += (self.y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(self.max_step_cap);
        let mut y1 = [0.0; D];
        for i in 0..D {
            y1[i] = self.y[i] + h * self.k[0][i];
        }
        let t1 = self.t + h;
        // A failed probe just falls back to the first-order guess.
        if self.eval(sys, t1, &y1, 1).is_err() {
            return Ok(h);
        }
        let mut der2 = 0.0;
        for i in 0..D {
            let sk = self.scale(self.y[i], self.y[i]);
            der2 += ((self.k[1][i] - self.k[0][i]) / sk).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(1.0 / 8.0)
        };
        Ok((100.0 * h).min(h1).min(self.max_step_cap))
    }

    fn stage_state(&self, h: f64, row: &[f64]) -> [f64; D] {
        let mut out = self.y;
        for (j, &a) in row.iter().enumerate() {
            if a != 0.0 {
                for i in 0..D {
                    out[i] += h * a * self.k[j][i];
                }
            }
        }
        out
    }

    /// Advances by one accepted step, retrying internally after rejections.
    pub fn step<S: System<D>>(&mut self, sys: &mut S) -> Result<()> {
        if !self.initialized {
            self.initialize(sys)?;
        }
        loop {
            let h = self.h.min(self.max_step_cap);
            if h < self.control.min_step {
                return Err(Error::StepUnderflow { t: self.t, h });
            }
            match self.attempt(sys, h) {
                Ok(true) => return Ok(()),
                Ok(false) => {}
                Err(Error::NodeProximity { .. }) | Err(Error::NonFinite { .. }) => {
                    self.stats.rejected += 1;
                    self.last_rejected = true;
                    self.h = 0.25 * h;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// One trial step of size `h`; returns whether it was accepted.
    fn attempt<S: System<D>>(&mut self, sys: &mut S, h: f64) -> Result<bool> {
        let t = self.t;
        for s in 1..12 {
            let ys = self.stage_state(h, &A[s][..s]);
            self.eval(sys, t + C[s] * h, &ys, s)?;
        }
        let mut y_new = self.y;
        let mut err = 0.0;
        let mut err2 = 0.0;
        for i in 0..D {
            let mut incr = 0.0;
            let mut e = 0.0;
            for j in 0..12 {
                incr += B[j] * self.k[j][i];
                e += ER[j] * self.k[j][i];
            }
            y_new[i] = self.y[i] + h * incr;
            let sk = self.scale(self.y[i], y_new[i]);
            let e2 = incr - BHH[0] * self.k[0][i] - BHH[1] * self.k[8][i] - BHH[2] * self.k[11][i];
            err += (e / sk).powi(2);
            err2 += (e2 / sk).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err * (1.0 / (deno * D as f64)).sqrt();
        if !err.is_finite() {
            return Err(Error::NonFinite { t });
        }

        let fac11 = err.powf(1.0 / 8.0);
        let fac = (fac11 / SAFETY).clamp(1.0 / 6.0, 1.0 / 0.333);
        if err <= 1.0 {
            let t_new = t + h;
            // FSAL evaluation. Stored in slot 12 so the stages stay intact for
            // dense output.
            self.eval(sys, t_new, &y_new, 12)?;
            self.t_old = t;
            self.y_old = self.y;
            self.h_old = h;
            self.t = t_new;
            self.y = y_new;
            self.dense_ready = false;
            // Keep stages for dense output in `cont` scratch before slot 0 is
            // overwritten.
            self.prepare_dense_base();
            self.k[0] = self.k[12];
            let mut h_new = h / fac;
            if self.last_rejected {
                h_new = h_new.min(h);
            }
            self.last_rejected = false;
            self.h = h_new.min(self.control.max_step);
            self.stats.accepted += 1;
            Ok(true)
        } else {
            self.h = h / (1.0 / 0.333f64).min(fac11 / SAFETY);
            self.last_rejected = true;
            self.stats.rejected += 1;
            Ok(false)
        }
    }

    /// Stores the parts of the dense-output polynomial that only need the
    /// main stages; the three extra stages are evaluated on demand.
    fn prepare_dense_base(&mut self) {
        let h = self.h_old;
        for i in 0..D {
            let ydiff = self.y[i] - self.y_old[i];
            let bspl = h * self.k[0][i] - ydiff;
            self.cont[0][i] = self.y_old[i];
            self.cont[1][i] = ydiff;
            self.cont[2][i] = bspl;
            self.cont[3][i] = ydiff - h * self.k[12][i] - bspl;
            for r in 0..4 {
                let mut acc = 0.0;
                for j in 0..12 {
                    acc += DENSE[r][j] * self.k[j][i];
                }
                self.cont[4 + r][i] = acc;
            }
        }
        // Slot 0 is about to be replaced by the FSAL derivative; keep the old
        // one for the extra stages.
        self.k[15] = self.k[0];
    }

    fn finish_dense<S: System<D>>(&mut self, sys: &mut S) -> Result<()> {
        let h = self.h_old;
        let t = self.t_old;
        // Stage slots: 15 = k1 of the last step, 1..=11 = stages 2..12,
        // 0 = FSAL (stage 13). Extra stages 14..16 go to scratch below.
        let stage = |me: &Self, j: usize| -> [f64; D] {
            match j {
                0 => me.k[15],
                12 => me.k[0],
                _ => me.k[j],
            }
        };
        let mut extra = [[0.0; D]; 3];
        for e in 0..3 {
            let mut ys = self.y_old;
            for j in 0..(13 + e) {
                let a = A_DENSE[e][j];
                if a == 0.0 {
                    continue;
                }
                let kj = if j < 13 { stage(self, j) } else { extra[j - 13] };
                for i in 0..D {
                    ys[i] += h * a * kj[i];
                }
            }
            self.stats.evaluations += 1;
            let mut out = [0.0; D];
            sys.rhs(t + C_DENSE[e] * h, &ys, &mut out)?;
            extra[e] = out;
        }
        let fsal = self.k[0];
        for r in 0..4 {
            for i in 0..D {
                let acc = self.cont[4 + r][i]
                    + DENSE[r][12] * fsal[i]
                    + DENSE[r][13] * extra[0][i]
                    + DENSE[r][14] * extra[1][i]
                    + DENSE[r][15] * extra[2][i];
                self.cont[4 + r][i] = h * acc;
            }
        }
        self.dense_ready = true;
        Ok(())
    }

    /// State at `t_query ∈ [t_prev, t]` from the continuous extension of the
    /// last accepted step.
    pub fn dense<S: System<D>>(&mut self, sys: &mut S, t_query: f64) -> Result<[f64; D]> {
        if !self.dense_ready {
            self.finish_dense(sys)?;
        }
        let s = (t_query - self.t_old) / self.h_old;
        let s1 = 1.0 - s;
        let mut out = [0.0; D];
        for i in 0..D {
            let c = &self.cont;
            let conpar = c[4][i] + s * (c[5][i] + s1 * (c[6][i] + s * c[7][i]));
            out[i] = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * conpar)));
        }
        Ok(out)
    }

    /// Integrates up to exactly `t_end`, shortening the final step.
    pub fn advance_to<S: System<D>>(&mut self, sys: &mut S, t_end: f64) -> Result<()> {
        while self.t < t_end {
            let remaining = t_end - self.t;
            if self.initialized && self.h >= remaining {
                self.h = remaining;
            }
            if !self.initialized {
                self.initialize(sys)?;
                self.h = self.h.min(remaining);
            }
            if remaining <= 1e-14 * self.t.abs().max(1.0) {
                break;
            }
            self.step(sys)?;
        }
        Ok(())
    }
}

const SAFETY: f64 = 0.9;

const C: [f64; 12] = [
    0.0,
    0.526001519587677318785587544488e-1,
    0.789002279381515978178381316732e-1,
    0.118350341907227396726757197510,
    0.281649658092772603273242802490,
    0.333333333333333333333333333333,
    0.25,
    0.307692307692307692307692307692,
    0.651282051282051282051282051282,
    0.6,
    0.857142857142857142857142857142,
    1.0,
];

const C_DENSE: [f64; 3] = [0.1, 0.2, 0.777777777777777777777777777778];

const A: [[f64; 12]; 12] = {
    let mut a = [[0.0; 12]; 12];
    a[1][0] = 5.26001519587677318785587544488e-2;
    a[2][0] = 1.97250569845378994544595329183e-2;
    a[2][1] = 5.91751709536136983633785987549e-2;
    a[3][0] = 2.95875854768068491816892993775e-2;
    a[3][2] = 8.87627564304205475450678981324e-2;
    a[4][0] = 2.41365134159266685502369798665e-1;
    a[4][2] = -8.84549479328286085344864962717e-1;
    a[4][3] = 9.24834003261792003115737966543e-1;
    a[5][0] = 3.7037037037037037037037037037e-2;
    a[5][3] = 1.70828608729473871279604482173e-1;
    a[5][4] = 1.25467687566822425016691814123e-1;
    a[6][0] = 3.7109375e-2;
    a[6][3] = 1.70252211019544039314978060272e-1;
    a[6][4] = 6.02165389804559606850219397283e-2;
    a[6][5] = -1.7578125e-2;
    a[7][0] = 3.70920001185047927108779319836e-2;
    a[7][3] = 1.70383925712239993810214054705e-1;
    a[7][4] = 1.07262030446373284651809199168e-1;
    a[7][5] = -1.53194377486244017527936158236e-2;
    a[7][6] = 8.27378916381402288758473766002e-3;
    a[8][0] = 6.24110958716075717114429577812e-1;
    a[8][3] = -3.36089262944694129406857109825;
    a[8][4] = -8.68219346841726006818189891453e-1;
    a[8][5] = 2.75920996994467083049415600797e1;
    a[8][6] = 2.01540675504778934086186788979e1;
    a[8][7] = -4.34898841810699588477366255144e1;
    a[9][0] = 4.77662536438264365890433908527e-1;
    a[9][3] = -2.48811461997166764192642586468;
    a[9][4] = -5.90290826836842996371446475743e-1;
    a[9][5] = 2.12300514481811942347288949897e1;
    a[9][6] = 1.52792336328824235832596922938e1;
    a[9][7] = -3.32882109689848629194453265587e1;
    a[9][8] = -2.03312017085086261358222928593e-2;
    a[10][0] = -9.3714243008598732571704021658e-1;
    a[10][3] = 5.18637242884406370830023853209;
    a[10][4] = 1.09143734899672957818500254654;
    a[10][5] = -8.14978701074692612513997267357;
    a[10][6] = -1.85200656599969598641566180701e1;
    a[10][7] = 2.27394870993505042818970056734e1;
    a[10][8] = 2.49360555267965238987089396762;
    a[10][9] = -3.0467644718982195003823669022;
    a[11][0] = 2.27331014751653820792359768449;
    a[11][3] = -1.05344954667372501984066689879e1;
    a[11][4] = -2.00087205822486249909675718444;
    a[11][5] = -1.79589318631187989172765950534e1;
    a[11][6] = 2.79488845294199600508499808837e1;
    a[11][7] = -2.85899827713502369474065508674;
    a[11][8] = -8.87285693353062954433549289258;
    a[11][9] = 1.23605671757943030647266201528e1;
    a[11][10] = 6.43392746015763530355970484046e-1;
    a
};

const B: [f64; 12] = [
    5.42937341165687622380535766363e-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.45031289275240888144113950566,
    1.89151789931450038304281599044,
    -5.8012039600105847814672114227,
    3.1116436695781989440891606237e-1,
    -1.52160949662516078556178806805e-1,
    2.01365400804030348374776537501e-1,
    4.47106157277725905176885569043e-2,
];

const BHH: [f64; 3] = [
    0.244094488188976377952755905512,
    0.733846688281611857341361741547,
    0.220588235294117647058823529412e-1,
];

const ER: [f64; 12] = [
    0.1312004499419488073250102996e-1,
    0.0,
    0.0,
    0.0,
    0.0,
    -0.1225156446376204440720569753e1,
    -0.4957589496572501915214079952,
    0.1664377182454986536961530415e1,
    -0.3503288487499736816886487290,
    0.3341791187130174790297318841,
    0.8192320648511571246570742613e-1,
    -0.2235530786388629525884427845e-1,
];

/// Coefficients for the three extra dense-output stages; index `j` is stage
/// `j + 1` (13 = FSAL derivative, 14 and 15 the earlier extra stages).
const A_DENSE: [[f64; 16]; 3] = {
    let mut a = [[0.0; 16]; 3];
    a[0][0] = 5.61675022830479523392909219681e-2;
    a[0][6] = 2.53500210216624811088794765333e-1;
    a[0][7] = -2.46239037470802489917441475441e-1;
    a[0][8] = -1.24191423263816360469010140626e-1;
    a[0][9] = 1.5329179827876569731206322685e-1;
    a[0][10] = 8.20105229563468988491666602057e-3;
    a[0][11] = 7.56789766054569976138603589584e-3;
    a[0][12] = -8.298e-3;
    a[1][0] = 3.18346481635021405060768473261e-2;
    a[1][5] = 2.83009096723667755288322961402e-2;
    a[1][6] = 5.35419883074385676223797384372e-2;
    a[1][7] = -5.49237485713909884646569340306e-2;
    a[1][10] = -1.08347328697249322858509316994e-4;
    a[1][11] = 3.82571090835658412954920192323e-4;
    a[1][12] = -3.40465008687404560802977114492e-4;
    a[1][13] = 1.41312443674632500278074618366e-1;
    a[2][0] = -4.28896301583791923408573538692e-1;
    a[2][5] = -4.69762141536116384314449447206;
    a[2][6] = 7.68342119606259904184240953878;
    a[2][7] = 4.06898981839711007970213554331;
    a[2][8] = 3.56727187455281109270669543021e-1;
    a[2][12] = -1.39902416515901462129418009734e-3;
    a[2][13] = 2.9475147891527723389556272149;
    a[2][14] = -9.15095847217987001081870187138;
    a
};

const DENSE: [[f64; 16]; 4] = {
    let mut d = [[0.0; 16]; 4];
    d[0][0] = -0.84289382761090128651353491142e1;
    d[0][5] = 0.56671495351937776962531783590;
    d[0][6] = -0.30689499459498916912797304727e1;
    d[0][7] = 0.23846676565120698287728149680e1;
    d[0][8] = 0.21170345824450282767155149946e1;
    d[0][9] = -0.87139158377797299206789907490;
    d[0][10] = 0.22404374302607882758541771650e1;
    d[0][11] = 0.63157877876946881815570249290;
    d[0][12] = -0.88990336451333310820698117400e-1;
    d[0][13] = 0.18148505520854727256656404962e2;
    d[0][14] = -0.91946323924783554000451984436e1;
    d[0][15] = -0.44360363875948939664310572000e1;
    d[1][0] = 0.10427508642579134603413151009e2;
    d[1][5] = 0.24228349177525818288430175319e3;
    d[1][6] = 0.16520045171727028198505394887e3;
    d[1][7] = -0.37454675472269020279518312152e3;
    d[1][8] = -0.22113666853125306036270938578e2;
    d[1][9] = 0.77334326684722638389603898808e1;
    d[1][10] = -0.30674084731089398182061213626e2;
    d[1][11] = -0.93321305264302278729567221706e1;
    d[1][12] = 0.15697238121770843886131091075e2;
    d[1][13] = -0.31139403219565177677282850411e2;
    d[1][14] = -0.93529243588444783865713862664e1;
    d[1][15] = 0.35816841486394083752465898540e2;
    d[2][0] = 0.19985053242002433820987653617e2;
    d[2][5] = -0.38703730874935176555105901742e3;
    d[2][6] = -0.18917813819516756882830838328e3;
    d[2][7] = 0.52780815920542364900561016686e3;
    d[2][8] = -0.11573902539959630126141871134e2;
    d[2][9] = 0.68812326946963000169666922661e1;
    d[2][10] = -0.10006050966910838403183860980e1;
    d[2][11] = 0.77771377980534432092869265740;
    d[2][12] = -0.27782057523535084065932004339e1;
    d[2][13] = -0.60196695231264120758267380846e2;
    d[2][14] = 0.84320405506677161018159903784e2;
    d[2][15] = 0.11992291136182789328035130030e2;
    d[3][0] = -0.25693933462703749003312586129e2;
    d[3][5] = -0.15418974869023643374053993627e3;
    d[3][6] = -0.23152937917604549567536039109e3;
    d[3][7] = 0.35763911791061412378285349910e3;
    d[3][8] = 0.93405324183624310003907691704e2;
    d[3][9] = -0.37458323136451633156875139351e2;
    d[3][10] = 0.10409964950896230045147246184e3;
    d[3][11] = 0.29840293426660503123344363579e2;
    d[3][12] = -0.43533456590011143754432175058e2;
    d[3][13] = 0.96324553959188282948394950600e2;
    d[3][14] = -0.39177261675615439165231486172e2;
    d[3][15] = -0.14972683625798562581422125276e3;
    d
};
