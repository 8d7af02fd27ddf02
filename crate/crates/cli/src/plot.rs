//! Gnuplot script text for the CSV outputs.

use lks_core::regularity::HolderEstimate;

fn header(title: &str, output: &str) -> String {
    format!(
        "set datafile separator ','\nset terminal pngcairo size 900,600\nset output '{output}'\nset title '{title}'\nset key left top\n"
    )
}

/// Log-log structure functions, one CSV per direction, with the fitted
/// power law drawn over its fit range.
pub fn holder(fits: &[(String, HolderEstimate)]) -> String {
    let mut s = header("structure functions", "holder.png");
    s.push_str("set logscale xy\nset xlabel 'lag'\nset ylabel 'E|dU|^p'\n");
    let mut plots = Vec::new();
    for (i, (csv, e)) in fits.iter().enumerate() {
        let dir = e.direction.as_str();
        plots.push(format!("'{csv}' every ::1 using 3:4:5 with yerrorbars title '{dir}'"));
        if !e.degenerate {
            s.push_str(&format!(
                "f{i}(x) = a{i} * x**({slope})\na{i} = 1\nfit [{lo}:{hi}] f{i}(x) '{csv}' every ::1 using 3:4 via a{i}\n",
                slope = e.gamma * e.p as f64,
                lo = e.fit_lo,
                hi = e.fit_hi
            ));
            plots.push(format!(
                "[{lo}:{hi}] f{i}(x) with lines title sprintf('{dir} gamma = %.3f', {g})",
                lo = e.fit_lo,
                hi = e.fit_hi,
                g = e.gamma
            ));
        }
    }
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}

/// Sup distance against the critical ratio on log-log axes.
pub fn ratio(csv: &str) -> String {
    let mut s = header("critical-ratio sweep", "ratio.png");
    s.push_str("set logscale xy\nset xlabel 'eps2/eps1^(d/8)'\nset ylabel 'sup E|U-u|^(2q)'\n");
    s.push_str(&format!("plot '{csv}' using 3:5 every ::1 with linespoints title 'sup distance'\n"));
    s
}

/// Kernel profiles, one curve per time.
pub fn kernel(csv: &str, times: &[f64]) -> String {
    let mut s = header("kernel profiles", "kernel.png");
    s.push_str("set xlabel 'r'\nset ylabel 'K_t(r)'\n");
    let plots: Vec<String> = times
        .iter()
        .map(|t| format!("'{csv}' every ::1 using ($1 == {t} ? $2 : 1/0):3 with lines title 't = {t}'"))
        .collect();
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use lks_core::regularity::Direction;

    #[test]
    fn holder_script_names_inputs_and_fit() {
        let e = HolderEstimate {
            direction: Direction::Time,
            p: 2,
            gamma: 0.37,
            stderr: 0.01,
            r2: 0.99,
            fit_lo: 0.01,
            fit_hi: 0.5,
            n_lags: 8,
            degenerate: false,
        };
        let s = holder(&[("structure.csv".to_string(), e)]);
        assert!(s.contains("'structure.csv'"));
        assert!(s.contains("gamma = %.3f"));
        assert!(s.starts_with("set datafile separator ','"));
    }

    #[test]
    fn kernel_script_has_one_curve_per_time() {
        let s = kernel("k.csv", &[0.1, 1.0]);
        assert_eq!(s.matches("with lines").count(), 2);
    }
}
