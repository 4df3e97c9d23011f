use crate::error::{CliError, CliResult};

/// Decimal snapping applied to range points, so `0:0.45:0.05` yields
/// `0.15` rather than `0.15000000000000002`.
const SNAP: f64 = 1e12;

/// Parses `start:stop:step` (inclusive) or a comma list into a strictly
/// increasing grid.
pub fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let bad = |why: &str| CliError::Usage(format!("grid {s:?}: {why}"));
    let num = |t: &str| t.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(&format!("{t:?} is not a number")));
    let parts: Vec<&str> = s.split(':').collect();
    let g = match parts.as_slice() {
        [one] => one.split(',').filter(|t| !t.trim().is_empty()).map(num).collect::<CliResult<Vec<f64>>>()?,
        [a, b, h] => {
            let (a, b, h) = (num(a)?, num(b)?, num(h)?);
            if !(h > 0.0) || b < a {
                return Err(bad("need start ≤ stop and step > 0"));
            }
            let k = ((b - a) / h + 1e-9).floor() as usize;
            if k > 1_000_000 {
                return Err(bad("more than a million points"));
            }
            (0..=k).map(|i| ((a + i as f64 * h) * SNAP).round() / SNAP).collect()
        }
        _ => return Err(bad("expected start:stop:step or a comma list")),
    };
    if g.is_empty() {
        return Err(bad("empty"));
    }
    if g.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("not strictly increasing"));
    }
    Ok(g)
}

/// Comma list of nonnegative integers.
pub fn parse_counts(s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("{t:?} is not a count"))))
        .collect()
}
