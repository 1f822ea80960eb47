//! External evaluation: every candidate is written to stdout as
//! `eval <x1> <x2> ...` and its objective is read back as one number per
//! stdin line (`inf` and `nan` count as failed evaluations). After the
//! budget a final `best <f> <x1> ...` line is printed.

use std::io::Write;
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};
use metadist::domain::format_real;
use metadist::tuning::{minimize, ParameterSpace, SearchOptions, TuneReport};

use crate::exit::{BadInput, Usage};
use crate::Search;

fn read_space(path: &std::path::Path) -> Result<ParameterSpace> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("{}: malformed JSON", path.display()))?;
    let space: ParameterSpace = if value.get("routes").is_some() {
        serde_json::from_value::<TuneReport>(value)?.space
    } else {
        serde_json::from_value(value)?
    };
    for d in &space.dims {
        if !(d.lo <= d.hi && d.lo.is_finite() && d.hi.is_finite()) {
            bail!(BadInput(format!("dimension `{}` has bounds [{}, {}]", d.name, d.lo, d.hi)));
        }
    }
    if space.is_empty() {
        bail!(BadInput(format!("{}: empty parameter space", path.display())));
    }
    Ok(space)
}

fn line(prefix: &str, values: impl IntoIterator<Item = f64>) -> String {
    let mut s = prefix.to_string();
    for v in values {
        s.push(' ');
        s.push_str(&format_real(v));
    }
    s
}

struct Channel {
    input: std::io::Stdin,
    output: std::io::Stdout,
    failed: Option<anyhow::Error>,
}

impl Channel {
    fn ask(&mut self, x: &[f64]) -> Result<f64> {
        writeln!(self.output, "{}", line("eval", x.iter().copied()))?;
        self.output.flush()?;
        let mut buf = String::new();
        if self.input.read_line(&mut buf)? == 0 {
            bail!(BadInput("stdin closed before the budget was spent".into()));
        }
        let t = buf.trim();
        t.parse::<f64>().map_err(|_| anyhow!(BadInput(format!("cannot parse objective value `{t}`"))))
    }
}

pub fn run(a: Search) -> Result<u8> {
    if a.budget == 0 {
        bail!(Usage("--budget must be at least 1".into()));
    }
    let space = read_space(&a.space)?;
    let channel = Mutex::new(Channel { input: std::io::stdin(), output: std::io::stdout(), failed: None });
    let objective = |x: &[f64]| {
        let mut c = channel.lock().expect("channel lock");
        if c.failed.is_some() {
            return f64::INFINITY;
        }
        match c.ask(x) {
            Ok(v) => v,
            Err(e) => {
                c.failed = Some(e);
                f64::INFINITY
            }
        }
    };
    let result = minimize(&objective, &space, SearchOptions { budget: a.budget, seed: a.seed, parallel: false, on_improve: &|_| None })?;
    let mut c = channel.into_inner().expect("channel lock");
    if let Some(e) = c.failed.take() {
        return Err(e);
    }
    writeln!(c.output, "{}", line(&format!("best {}", format_real(result.best_objective)), result.best.iter().copied()))?;
    Ok(0)
}
