//! Report serialization: compact JSON with a fixed key order, or plain
//! `key value` lines. Floats print with 17 significant digits so every
//! value round-trips to the exact f64.

use std::fmt::Write;

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn json_lambda(lambda: &[(String, f64)]) -> String {
    let items: Vec<String> = lambda
        .iter()
        .map(|(label, weight)| {
            format!(
                "{{\"label\":{},\"weight\":{}}}",
                json_string(label),
                fmt_float(*weight)
            )
        })
        .collect();
    format!("[{}]", items.join(","))
}

/// The solver report shared by the `variance` and `qp` commands.
/// `lambda` and `witness_labels` are in input (row) order.
pub struct SolverReport {
    pub upper_variance: f64,
    pub lower_variance: f64,
    pub mu_star: f64,
    pub lambda: Vec<(String, f64)>,
    pub witness_kind: &'static str,
    pub witness_labels: Vec<String>,
    pub shift_applied: f64,
}

impl SolverReport {
    pub fn to_json(&self) -> String {
        let witness_labels: Vec<String> =
            self.witness_labels.iter().map(|l| json_string(l)).collect();
        format!(
            "{{\"upper_variance\":{},\"lower_variance\":{},\"mu_star\":{},\"lambda_star\":{},\"witness\":{{\"kind\":\"{}\",\"labels\":[{}]}},\"shift_applied\":{}}}",
            fmt_float(self.upper_variance),
            fmt_float(self.lower_variance),
            fmt_float(self.mu_star),
            json_lambda(&self.lambda),
            self.witness_kind,
            witness_labels.join(","),
            fmt_float(self.shift_applied),
        )
    }

    pub fn to_plain(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "upper_variance {}", fmt_float(self.upper_variance));
        let _ = writeln!(out, "lower_variance {}", fmt_float(self.lower_variance));
        let _ = writeln!(out, "mu_star {}", fmt_float(self.mu_star));
        for (label, weight) in &self.lambda {
            let _ = writeln!(out, "lambda {label} {}", fmt_float(*weight));
        }
        let _ = writeln!(
            out,
            "witness {} {}",
            self.witness_kind,
            self.witness_labels.join(" ")
        );
        let _ = write!(out, "shift_applied {}", fmt_float(self.shift_applied));
        out
    }
}

/// Output of the `oracle` command: the ternary search always runs, the
/// grid sweep only when the measure count is within the configured limit.
pub struct OracleReport {
    pub minimax_value: f64,
    pub mu_star: f64,
    pub iterations: usize,
    pub grid: Option<GridReport>,
}

pub struct GridReport {
    pub value: f64,
    pub grid_n: u32,
    pub lipschitz_bound: f64,
    pub lambda: Vec<(String, f64)>,
}

impl OracleReport {
    pub fn to_json(&self) -> String {
        let grid = match &self.grid {
            Some(grid) => format!(
                "{{\"value\":{},\"grid_n\":{},\"lipschitz_bound\":{},\"lambda\":{}}}",
                fmt_float(grid.value),
                grid.grid_n,
                fmt_float(grid.lipschitz_bound),
                json_lambda(&grid.lambda),
            ),
            None => "null".to_string(),
        };
        format!(
            "{{\"minimax_value\":{},\"mu_star\":{},\"iterations\":{},\"grid\":{}}}",
            fmt_float(self.minimax_value),
            fmt_float(self.mu_star),
            self.iterations,
            grid,
        )
    }

    pub fn to_plain(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "minimax_value {}", fmt_float(self.minimax_value));
        let _ = writeln!(out, "mu_star {}", fmt_float(self.mu_star));
        let _ = writeln!(out, "iterations {}", self.iterations);
        match &self.grid {
            Some(grid) => {
                let _ = writeln!(out, "grid_value {}", fmt_float(grid.value));
                let _ = writeln!(out, "grid_n {}", grid.grid_n);
                let _ = writeln!(out, "lipschitz_bound {}", fmt_float(grid.lipschitz_bound));
                for (label, weight) in &grid.lambda {
                    let _ = writeln!(out, "grid_lambda {label} {}", fmt_float(*weight));
                }
            }
            None => {
                let _ = writeln!(out, "grid refused (too many measures)");
            }
        }
        out.trim_end().to_string()
    }
}

/// Output of the `estimate` command, in first-appearance group order.
pub struct EstimateReport {
    pub moments: Vec<EstimatedGroup>,
}

pub struct EstimatedGroup {
    pub label: String,
    pub mean: f64,
    pub variance: f64,
    pub second_moment: f64,
}

impl EstimateReport {
    pub fn to_json(&self) -> String {
        let items: Vec<String> = self
            .moments
            .iter()
            .map(|g| {
                format!(
                    "{{\"label\":{},\"mean\":{},\"variance\":{},\"second_moment\":{}}}",
                    json_string(&g.label),
                    fmt_float(g.mean),
                    fmt_float(g.variance),
                    fmt_float(g.second_moment),
                )
            })
            .collect();
        format!("{{\"moments\":[{}]}}", items.join(","))
    }

    pub fn to_plain(&self) -> String {
        let lines: Vec<String> = self
            .moments
            .iter()
            .map(|g| {
                format!(
                    "moment {} {} {} {}",
                    g.label,
                    fmt_float(g.mean),
                    fmt_float(g.variance),
                    fmt_float(g.second_moment)
                )
            })
            .collect();
        lines.join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.41, -0.75, 0.0, 1.0 / 3.0, 1e-300, 123456.789] {
            let back: f64 = fmt_float(x).parse().unwrap();
            assert_eq!(back, x);
        }
    }

    #[test]
    fn json_escapes_labels() {
        assert_eq!(json_string("a\"b\\c"), "\"a\\\"b\\\\c\"");
        assert_eq!(json_string("tab\there"), "\"tab\\there\"");
    }

    #[test]
    fn solver_report_key_order() {
        let report = SolverReport {
            upper_variance: 0.41,
            lower_variance: 0.4,
            mu_star: 0.0,
            lambda: vec![("bull".into(), 0.5), ("bear".into(), 0.5)],
            witness_kind: "pair",
            witness_labels: vec!["bull".into(), "bear".into()],
            shift_applied: 0.0,
        };
        let json = report.to_json();
        let order = [
            "upper_variance",
            "lower_variance",
            "mu_star",
            "lambda_star",
            "witness",
            "shift_applied",
        ];
        let positions: Vec<usize> = order.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }
}
