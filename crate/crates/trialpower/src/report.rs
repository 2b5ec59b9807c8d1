//! Report formatting shared by the CLI writers: 6-significant-digit numeric
//! rendering, CSV assembly, and aligned text tables.

/// Format a number with 6 significant digits, dot decimal separator, no
/// thousands separators. Non-finite values render as their Rust names.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if magnitude < -4 || magnitude >= 15 {
        return format!("{:.5e}", x);
    }
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    // trim trailing zeros after the decimal point, then a bare point
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.');
        trimmed.to_string()
    } else {
        s
    }
}

/// Minimal CSV escaping: quote fields containing separators or quotes.
fn csv_field(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Render a header row plus data rows as CSV text with a trailing newline.
pub fn render_csv(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(
        &headers.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(","),
    );
    out.push('\n');
    for row in rows {
        out.push_str(
            &row.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(","),
        );
        out.push('\n');
    }
    out
}

/// Render rows as a human-readable aligned table. Columns whose values all
/// look numeric (allowing the parenthesized fixed-value marker) are
/// right-justified; text columns are left-justified.
pub fn render_aligned(headers: &[&str], rows: &[Vec<String>]) -> String {
    let ncol = headers.len();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(ncol) {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let looks_numeric = |cell: &str| {
        let inner = cell.trim_start_matches('(').trim_end_matches(')');
        inner.parse::<f64>().is_ok()
    };
    let numeric: Vec<bool> = (0..ncol)
        .map(|i| {
            let mut any = false;
            for row in rows {
                if let Some(cell) = row.get(i) {
                    if cell.is_empty() {
                        continue;
                    }
                    if !looks_numeric(cell) {
                        return false;
                    }
                    any = true;
                }
            }
            any
        })
        .collect();
    let mut out = String::new();
    for (i, h) in headers.iter().enumerate() {
        if i > 0 {
            out.push_str("  ");
        }
        out.push_str(&format!("{:<width$}", h, width = widths[i]));
    }
    out.push('\n');
    for (i, w) in widths.iter().enumerate() {
        if i > 0 {
            out.push_str("  ");
        }
        out.push_str(&"-".repeat(*w));
    }
    out.push('\n');
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(ncol) {
            if i > 0 {
                out.push_str("  ");
            }
            if numeric[i] {
                out.push_str(&format!("{:>width$}", cell, width = widths[i]));
            } else {
                out.push_str(&format!("{:<width$}", cell, width = widths[i]));
            }
        }
        out.push('\n');
    }
    out
}
