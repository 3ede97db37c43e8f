//! Parsing of `--thrusts` lists such as `0,mg/4,mg/2,12.5`.

/// Parses a comma-separated list of thrust values in newtons. Besides plain
/// numbers, each entry may be written in terms of the robot weight `mg`:
/// `mg`, `mg/4`, `mg*0.3` or `0.3*mg`.
pub fn parse_thrust_list(list: &str, weight_n: f64) -> Result<Vec<f64>, String> {
    let values: Vec<f64> = list
        .split(',')
        .map(|item| parse_thrust(item.trim(), weight_n))
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err("empty thrust list".into());
    }
    Ok(values)
}

fn number(s: &str, whole: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("invalid thrust '{whole}'"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("invalid thrust '{whole}'"))
    }
}

fn parse_thrust(item: &str, weight_n: f64) -> Result<f64, String> {
    if item.is_empty() {
        return Err("empty entry in thrust list".into());
    }
    let compact: String = item.chars().filter(|c| !c.is_whitespace()).collect();
    if compact == "mg" {
        return Ok(weight_n);
    }
    if let Some(rest) = compact.strip_prefix("mg/") {
        let d = number(rest, item)?;
        if d == 0.0 {
            return Err(format!("invalid thrust '{item}': division by zero"));
        }
        return Ok(weight_n / d);
    }
    if let Some(rest) = compact.strip_prefix("mg*") {
        return Ok(weight_n * number(rest, item)?);
    }
    if let Some(rest) = compact.strip_suffix("*mg") {
        return Ok(number(rest, item)? * weight_n);
    }
    number(&compact, item)
}
