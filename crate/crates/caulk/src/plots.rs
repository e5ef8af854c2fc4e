//! Charts for each CSV schema. Sweep commands render their SVGs through these
//! same builders, so `caulk plot` on an emitted CSV reproduces the SVG.

use crate::error::CliError;
use crate::svg::{render, Chart, Point, PowerLine, Series};
use crate::tables::{Schema, Table};
use caulk_core::stats::fit_line;

pub fn chart_for(table: &Table) -> Result<Chart, CliError> {
    match table.schema {
        Schema::Rate => rate_chart(table),
        Schema::Depth => depth_chart(table),
        Schema::MSweep => m_sweep_chart(table),
        Schema::Caulking => caulking_chart(table),
        Schema::Trace => trace_chart(table),
    }
}

pub fn svg_for_csv(text: &str) -> Result<String, CliError> {
    Ok(render(&chart_for(&Table::parse(text)?)?))
}

/// Least-squares power law through positive points, when there are at least three.
fn power_fit(xs: &[f64], ys: &[f64]) -> Option<PowerLine> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let fit = fit_line(&lx, &ly);
    Some(PowerLine {
        name: format!("fit, slope {:.3}", fit.slope),
        slope: fit.slope,
        intercept: fit.intercept,
    })
}

fn points(xs: &[f64], ys: &[f64], errs: Option<&[f64]>) -> Vec<Point> {
    xs.iter()
        .zip(ys)
        .enumerate()
        .map(|(i, (&x, &y))| Point {
            x,
            y,
            err: errs.map(|e| e[i]),
        })
        .collect()
}

fn rate_chart(t: &Table) -> Result<Chart, CliError> {
    let n = t.column("n")?;
    let e = t.column("mean_error")?;
    let se = t.column("std_error")?;
    Ok(Chart {
        title: "L2 error vs sample size".into(),
        x_label: "n".into(),
        y_label: "mean L2 error".into(),
        x_log: true,
        y_log: true,
        series: vec![Series {
            name: "mean error".into(),
            points: points(&n, &e, Some(&se)),
            min_index: None,
        }],
        lines: power_fit(&n, &e).into_iter().collect(),
    })
}

fn depth_chart(t: &Table) -> Result<Chart, CliError> {
    let variants = t.text_column("variant")?;
    let depth = t.column("depth")?;
    let e = t.column("mean_error")?;
    let se = t.column("std_error")?;
    let is_min = t.text_column("is_min")?;
    let mut series: Vec<Series> = Vec::new();
    for (i, v) in variants.iter().enumerate() {
        let k = match series.iter().position(|s| &s.name == v) {
            Some(k) => k,
            None => {
                series.push(Series {
                    name: v.clone(),
                    points: Vec::new(),
                    min_index: None,
                });
                series.len() - 1
            }
        };
        let s = &mut series[k];
        if is_min[i] == "true" {
            s.min_index = Some(s.points.len());
        }
        s.points.push(Point {
            x: depth[i],
            y: e[i],
            err: Some(se[i]),
        });
    }
    Ok(Chart {
        title: "L2 error vs adapter depth".into(),
        x_label: "adapter depth (hidden layers)".into(),
        y_label: "mean L2 error".into(),
        x_log: false,
        y_log: true,
        series,
        lines: Vec::new(),
    })
}

fn m_sweep_chart(t: &Table) -> Result<Chart, CliError> {
    let ms = t.text_column("m")?;
    let ex = t.column("exponent")?;
    let finite_max = ms
        .iter()
        .filter_map(|m| m.parse::<f64>().ok())
        .fold(1.0f64, f64::max);
    let xs: Vec<f64> = ms
        .iter()
        .map(|m| m.parse::<f64>().unwrap_or(4.0 * finite_max))
        .collect();
    Ok(Chart {
        title: "fitted rate exponent vs source size (oracle at right end)".into(),
        x_label: "source sample size m".into(),
        y_label: "fitted exponent".into(),
        x_log: true,
        y_log: false,
        series: vec![Series {
            name: "exponent".into(),
            points: points(&xs, &ex, None),
            min_index: None,
        }],
        lines: Vec::new(),
    })
}

fn caulking_chart(t: &Table) -> Result<Chart, CliError> {
    let n = t.column("n")?;
    let e = t.column("l2_estimate")?;
    let se = t.column("l2_stderr")?;
    Ok(Chart {
        title: "per-model L2 error".into(),
        x_label: "n".into(),
        y_label: "L2 error".into(),
        x_log: true,
        y_log: true,
        series: vec![Series {
            name: "models".into(),
            points: points(&n, &e, Some(&se)),
            min_index: None,
        }],
        lines: Vec::new(),
    })
}

fn trace_chart(t: &Table) -> Result<Chart, CliError> {
    let epoch = t.column("epoch")?;
    let loss = t.column("loss")?;
    Ok(Chart {
        title: "training loss".into(),
        x_label: "epoch".into(),
        y_label: "loss".into(),
        x_log: false,
        y_log: true,
        series: vec![Series {
            name: "loss".into(),
            points: points(&epoch, &loss, None),
            min_index: None,
        }],
        lines: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_plot_has_fit_line_and_error_bars() {
        let csv = "n,trials,mean_error,std_error\n64,2,0.01,0.001\n128,2,0.005,0.001\n256,2,0.0025,0.0001\n";
        let svg = svg_for_csv(csv).unwrap();
        assert!(svg.contains("fit-line"));
        assert!(svg.contains("slope -1.000"));
        assert_eq!(svg.matches("class=\"error-bar\"").count(), 3);
        assert_eq!(svg, svg_for_csv(csv).unwrap());
    }

    #[test]
    fn depth_plot_marks_each_variant_minimum() {
        let csv = "variant,depth,mean_error,std_error,is_min\nwide,0,0.1,0.01,true\nwide,1,0.2,0.01,false\nnarrow,0,0.3,0.01,false\nnarrow,1,0.1,0.01,true\n";
        let svg = svg_for_csv(csv).unwrap();
        assert_eq!(svg.matches("min-marker").count(), 2);
    }

    #[test]
    fn m_sweep_plot_places_the_oracle() {
        let csv = "m,exponent,r_squared\n128,-0.5,0.9\noracle,-1,0.9\n";
        assert!(svg_for_csv(csv).unwrap().contains("polyline"));
    }

    #[test]
    fn unknown_schema_fails() {
        assert!(svg_for_csv("x,y\n1,2\n").is_err());
    }
}
