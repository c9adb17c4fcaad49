//! Locale-independent number formatting shared by plots and prompts.

/// Fixed decimals; negative zero prints as zero.
pub fn fixed(value: f64, decimals: usize) -> String {
    let s = format!("{value:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Fixed decimals with an explicit `+` on positive values.
pub fn signed(value: f64, decimals: usize) -> String {
    let s = fixed(value, decimals);
    if s.starts_with('-') || s.chars().all(|c| c == '0' || c == '.') {
        s
    } else {
        format!("+{s}")
    }
}

/// Up to four decimals, trailing zeros dropped: `324.0 -> "324"`, `392.2 -> "392.2"`.
pub fn compact(value: f64) -> String {
    let s = fixed(value, 4);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Four significant digits, plain notation.
pub fn significant4(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    let decimals = |v: f64| (3 - v.abs().log10().floor() as i32).max(0) as usize;
    let d = decimals(value);
    let s = fixed(value, d);
    // Rounding may carry into a new digit (9.9996 -> 10.000); redo with the rounded magnitude.
    let rounded: f64 = s.parse().unwrap_or(value);
    if rounded != 0.0 && decimals(rounded) != d {
        fixed(value, decimals(rounded))
    } else {
        s
    }
}
