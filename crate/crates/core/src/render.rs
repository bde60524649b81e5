//! Small formatting helpers shared by the report emitters.

/// Scores are displayed truncated to two decimals with a single trailing
/// zero trimmed: 0.805714 -> "0.8", 0.882222 -> "0.88", 1.0 -> "1.0".
/// Comparisons always use the full-precision value; this is display only.
pub fn fmt_score(v: f64) -> String {
    let cents = ((v * 100.0) + 1e-9).floor() as i64;
    let whole = cents / 100;
    let frac = (cents % 100).abs();
    if frac % 10 == 0 {
        format!("{whole}.{}", frac / 10)
    } else {
        format!("{whole}.{frac:02}")
    }
}

/// Percentages round to two decimals: 11.09777 -> "11.10".
pub fn fmt_pct(v: f64) -> String {
    format!("{v:.2}")
}

/// Heatmap cell for an alert rate: blank when nothing was reported, ">0"
/// for sub-0.01 rates, otherwise the rate with up to two decimals.
pub fn fmt_rate(count: u64, rate: f64) -> String {
    if count == 0 {
        String::new()
    } else if rate < 0.01 {
        ">0".to_string()
    } else {
        trim_decimal(format!("{rate:.2}"))
    }
}

fn trim_decimal(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_display_truncates_then_trims() {
        assert_eq!(fmt_score(1.0), "1.0");
        assert_eq!(fmt_score(0.882222222), "0.88");
        assert_eq!(fmt_score(0.8057142857), "0.8");
        assert_eq!(fmt_score(0.7142857142), "0.71");
        assert_eq!(fmt_score(0.0), "0.0");
        assert_eq!(fmt_score(0.88), "0.88");
        assert_eq!(fmt_score(0.5), "0.5");
    }

    #[test]
    fn pct_display_rounds() {
        assert_eq!(fmt_pct(11.097774168), "11.10");
        assert_eq!(fmt_pct(0.0), "0.00");
        assert_eq!(fmt_pct(100.0), "100.00");
    }

    #[test]
    fn rate_cells() {
        assert_eq!(fmt_rate(0, 0.0), "");
        assert_eq!(fmt_rate(1, 0.0033), ">0");
        assert_eq!(fmt_rate(120, 120.0), "120");
        assert_eq!(fmt_rate(5, 8.4), "8.4");
        assert_eq!(fmt_rate(5, 8.43), "8.43");
    }
}
