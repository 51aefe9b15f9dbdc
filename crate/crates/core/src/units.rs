//! Power unit conversions. Linear powers are in milliwatts.

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        assert!((dbm_to_mw(0.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_mw(-30.0) - 1e-3).abs() < 1e-18);
        assert!((mw_to_dbm(dbm_to_mw(-17.5)) + 17.5).abs() < 1e-12);
        assert!((linear_to_db(db_to_linear(6.02)) - 6.02).abs() < 1e-12);
    }
}
