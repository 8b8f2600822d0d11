use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::quadrature;

const CSV_HEADER: [&str; 2] = ["x_years", "value_per_year"];

/// Forward rates on the uniform maturity grid `x = k · dx`, `k = 0..=n_points`,
/// extended by the constant `tail_value` beyond `x_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCurve {
    x_max: f64,
    values: Vec<f64>,
    tail_value: f64,
}

impl ForwardCurve {
    pub fn new(x_max: f64, values: Vec<f64>, tail_value: f64) -> Result<Self> {
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("x_max must be positive, got {x_max}")));
        }
        if values.len() < 2 {
            return Err(Error::InvalidGrid("a curve needs at least two nodes".into()));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidCurve(format!("non-finite value at node {k}")));
        }
        if !tail_value.is_finite() {
            return Err(Error::InvalidCurve("non-finite tail value".into()));
        }
        Ok(ForwardCurve {
            x_max,
            values,
            tail_value,
        })
    }

    /// Samples `f` at the nodes; the tail value is taken from `tail`.
    pub fn from_fn<F: Fn(f64) -> f64>(x_max: f64, n_points: usize, f: F, tail: f64) -> Result<Self> {
        let dx = x_max / n_points as f64;
        let values = (0..=n_points).map(|k| f(k as f64 * dx)).collect();
        Self::new(x_max, values, tail)
    }

    pub fn constant(x_max: f64, n_points: usize, level: f64) -> Result<Self> {
        Self::new(x_max, vec![level; n_points + 1], level)
    }

    pub fn zeros_like(other: &ForwardCurve) -> Self {
        ForwardCurve {
            x_max: other.x_max,
            values: vec![0.0; other.values.len()],
            tail_value: 0.0,
        }
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.values.len() - 1
    }

    pub fn dx(&self) -> f64 {
        self.x_max / self.n_points() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn tail_value(&self) -> f64 {
        self.tail_value
    }

    pub fn set_tail_value(&mut self, v: f64) {
        self.tail_value = v;
    }

    pub fn node(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn x(&self, k: usize) -> f64 {
        if k == self.n_points() {
            self.x_max
        } else {
            k as f64 * self.dx()
        }
    }

    /// `h(x)`: exact at nodes, linear between nodes, `tail_value` beyond `x_max`.
    pub fn eval(&self, x: f64) -> f64 {
        if x > self.x_max {
            return self.tail_value;
        }
        let r = x.max(0.0) / self.dx();
        let k = r.floor() as usize;
        if k >= self.n_points() {
            return self.values[self.n_points()];
        }
        let w = r - k as f64;
        if w == 0.0 {
            self.values[k]
        } else {
            (1.0 - w) * self.values[k] + w * self.values[k + 1]
        }
    }

    pub fn same_grid(&self, other: &ForwardCurve) -> bool {
        self.values.len() == other.values.len() && self.x_max == other.x_max
    }

    fn check_same_grid(&self, other: &ForwardCurve) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::InvalidGrid("curves live on different grids".into()))
        }
    }

    /// `a · self + b · other`, tails included.
    pub fn combine(&self, a: f64, other: &ForwardCurve, b: f64) -> Result<ForwardCurve> {
        self.check_same_grid(other)?;
        Ok(ForwardCurve {
            x_max: self.x_max,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(u, v)| a * u + b * v)
                .collect(),
            tail_value: a * self.tail_value + b * other.tail_value,
        })
    }

    pub fn scaled(&self, a: f64) -> ForwardCurve {
        ForwardCurve {
            x_max: self.x_max,
            values: self.values.iter().map(|v| a * v).collect(),
            tail_value: a * self.tail_value,
        }
    }

    /// Number of grid cells corresponding to a shift by `t`.
    pub fn shift_steps(&self, t: f64) -> Result<usize> {
        let dx = self.dx();
        let r = t / dx;
        let k = r.round();
        if t < 0.0 || (r - k).abs() > 1e-12 * r.abs().max(1.0) {
            return Err(Error::NonAlignedShift { shift: t, dx });
        }
        Ok(k as usize)
    }

    /// `(S_t h)(x) = h(x + t)`; vacated nodes take the tail value.
    pub fn shift(&self, t: f64) -> Result<ForwardCurve> {
        let k = self.shift_steps(t)?;
        let mut out = self.clone();
        out.shift_nodes_in_place(k);
        Ok(out)
    }

    /// In-place shift by `k` grid cells.
    pub fn shift_nodes_in_place(&mut self, k: usize) {
        let n = self.values.len();
        if k >= n {
            self.values.fill(self.tail_value);
        } else if k > 0 {
            self.values.copy_within(k.., 0);
            self.values[n - k..].fill(self.tail_value);
        }
    }

    /// Trapezoid integral `∫_0^tau h(x) dx`; `tau` must be a node.
    pub fn integral_to(&self, tau: f64) -> Result<f64> {
        if tau > self.x_max * (1.0 + 1e-12) || tau < 0.0 {
            return Err(Error::MaturityBeyondGrid { tau, x_max: self.x_max });
        }
        let k = self.shift_steps(tau).map_err(|_| Error::NonAlignedShift {
            shift: tau,
            dx: self.dx(),
        })?;
        Ok(quadrature::trapezoid(&self.values[..=k], self.dx()))
    }

    /// Writes `x_years,value_per_year` rows; a final row with `x = inf`
    /// carries the tail value.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        for (k, v) in self.values.iter().enumerate() {
            out.write_record([self.x(k).to_string(), v.to_string()])?;
        }
        out.write_record(["inf".to_string(), self.tail_value.to_string()])?;
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Reads the format produced by [`ForwardCurve::write_csv`]. Nodes must be
    /// uniformly spaced starting at 0.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(Error::Io(format!(
                "expected header `x_years,value_per_year`, got {headers:?}"
            )));
        }
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Io(format!("expected 2 fields, got {}", rec.len())));
            }
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Io(e.to_string()));
            xs.push(parse(&rec[0])?);
            vs.push(parse(&rec[1])?);
        }
        if xs.last() != Some(&f64::INFINITY) {
            return Err(Error::Io("missing final `inf` row with the tail value".into()));
        }
        xs.pop();
        let tail = vs.pop().expect("row present");
        if xs.len() < 2 || xs[0] != 0.0 {
            return Err(Error::InvalidGrid(
                "curve CSV must start at x = 0 with at least two rows".into(),
            ));
        }
        let x_max = *xs.last().unwrap();
        let dx = x_max / (xs.len() - 1) as f64;
        for (k, x) in xs.iter().enumerate() {
            if (x - k as f64 * dx).abs() > 1e-9 * x_max.max(1.0) {
                return Err(Error::InvalidGrid(format!("non-uniform node at row {k}: x = {x}")));
            }
        }
        Self::new(x_max, vs, tail)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
