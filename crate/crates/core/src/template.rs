//! `{n}`-style day substitution used by sentence sequences and program templates.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unterminated `{{` in template")]
    Unterminated,
    #[error("bad day expression `{{{0}}}`; expected n, n+K or n-K")]
    BadExpr(String),
    #[error("day expression `{{{expr}}}` is not positive at n={n}")]
    NonPositive { expr: String, n: usize },
}

/// Replaces every `{n}`, `{n+K}`, `{n-K}` with its value at day `n`.
pub fn instantiate(template: &str, n: usize) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(i) = rest.find('{') {
        out.push_str(&rest[..i]);
        let after = &rest[i + 1..];
        let j = after.find('}').ok_or(TemplateError::Unterminated)?;
        let expr = after[..j].trim();
        out.push_str(&eval_day(expr, n)?.to_string());
        rest = &after[j + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn eval_day(expr: &str, n: usize) -> Result<usize, TemplateError> {
    let bad = || TemplateError::BadExpr(expr.to_string());
    let body: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
    let tail = body.strip_prefix('n').ok_or_else(bad)?;
    let v: i64 = if tail.is_empty() {
        n as i64
    } else if let Some(k) = tail.strip_prefix('+') {
        n as i64 + k.parse::<i64>().map_err(|_| bad())?
    } else if let Some(k) = tail.strip_prefix('-') {
        n as i64 - k.parse::<i64>().map_err(|_| bad())?
    } else {
        return Err(bad());
    };
    if v < 1 {
        return Err(TemplateError::NonPositive {
            expr: expr.to_string(),
            n,
        });
    }
    Ok(v as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitutes_offsets() {
        assert_eq!(instantiate("chi_{n}", 7).unwrap(), "chi_7");
        assert_eq!(
            instantiate("P[a]@{n-1} + P[a]@{ n }", 3).unwrap(),
            "P[a]@2 + P[a]@3"
        );
        assert_eq!(instantiate("x{n+2}", 1).unwrap(), "x3");
        assert!(matches!(
            instantiate("P[a]@{n-1}", 1),
            Err(TemplateError::NonPositive { .. })
        ));
        assert!(instantiate("{m}", 1).is_err());
        assert!(instantiate("{n", 1).is_err());
    }
}
