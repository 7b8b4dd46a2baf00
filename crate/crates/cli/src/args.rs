//! Value parsers for the command-line flags.

use num_complex::Complex64;

/// Accepts `a+bi`, `a-bi`, `bi`, `a`, or `a,b`.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let s = s.trim().replace(' ', "");
    if s.is_empty() {
        return Err("empty complex number".into());
    }
    let bad = || format!("cannot parse `{s}` as a complex number (try 0.5+0.5i or 0.5,0.5)");
    if let Some((a, b)) = s.split_once(',') {
        let re = a.parse::<f64>().map_err(|_| bad())?;
        let im = b.parse::<f64>().map_err(|_| bad())?;
        return Ok(Complex64::new(re, im));
    }
    let Some(body) = s.strip_suffix('i').or_else(|| s.strip_suffix('j')) else {
        return s.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    // Find the sign that separates the real part, skipping exponent signs.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => other.parse::<f64>().map_err(|_| bad())?,
    };
    let re = re.parse::<f64>().map_err(|_| bad())?;
    Ok(Complex64::new(re, im))
}

/// `41` for a square grid, `41x31` for columns × rows.
pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let bad = || format!("cannot parse grid `{s}` (expected N or NXxNY)");
    let (nx, ny) = match s.split_once(['x', 'X']) {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let n = s.trim().parse().map_err(|_| bad())?;
            (n, n)
        }
    };
    if nx == 0 || ny == 0 {
        return Err(bad());
    }
    Ok((nx, ny))
}

/// `min,max` for both axes, or `xmin,xmax,ymin,ymax`.
pub fn parse_range(s: &str) -> Result<[f64; 4], String> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("cannot parse range `{s}`"))?;
    match vals[..] {
        [lo, hi] => Ok([lo, hi, lo, hi]),
        [x0, x1, y0, y1] => Ok([x0, x1, y0, y1]),
        _ => Err(format!("range `{s}` needs 2 or 4 numbers")),
    }
}
