//! Ingestion and alignment of price, sentiment and macro files into per-day
//! feature frames.
//!
//! The trading calendar is whatever distinct dates the price file contains;
//! there is no external calendar. Missing ticker-days inside a ticker's
//! observed range are forward-filled (previous close, zero volume) for up to
//! [`FeatureParams::ffill_limit`] consecutive days; longer runs stay missing.

use crate::entity::EntityId;
use crate::error::{CoreError, Result};
use crate::num::{real, to_f64, Real};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceRecord {
    pub date: NaiveDate,
    pub ticker: EntityId,
    pub close: f64,
    pub volume: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentimentRecord {
    pub date: NaiveDate,
    pub ticker: EntityId,
    pub polarity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroRecord {
    pub date: NaiveDate,
    pub indicator_id: EntityId,
    pub value: f64,
}

/// Per-asset, per-day features. `log_return` and `realised_vol` are kept in
/// their natural units; `volume_z` is z-scored against training statistics;
/// `sentiment` is a mean polarity in [-1, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<F> {
    pub log_return: F,
    pub realised_vol: F,
    pub volume_z: F,
    pub sentiment: F,
}

/// Unified market view for one trading day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketFrame<F> {
    pub date: NaiveDate,
    pub features: BTreeMap<EntityId, FeatureVector<F>>,
}

/// Per-ticker dated log returns plus the tickers that were too short to
/// produce any.
#[derive(Clone, Debug, Default)]
pub struct LogReturns<F> {
    pub series: BTreeMap<EntityId, BTreeMap<NaiveDate, F>>,
    pub flagged: Vec<EntityId>,
}

/// Windowing and warm-up parameters for frame construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    /// Trading days of history required before the first frame is emitted
    /// (frames start at this 0-based calendar index).
    pub min_history: usize,
    /// Rolling window for realised volatility, in returns.
    pub vol_window: usize,
    /// Longest run of missing ticker-days that is forward-filled.
    pub ffill_limit: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            min_history: 252,
            vol_window: 30,
            ffill_limit: 5,
        }
    }
}

/// Mean and population standard deviation of one feature over the training
/// range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments<F> {
    pub mean: F,
    pub std: F,
}

impl<F: Real> Moments<F> {
    /// Z-score under these moments; a degenerate (zero) std maps everything
    /// to 0 so that constant features stay ranking-neutral.
    pub fn z(&self, x: F) -> F {
        if self.std == F::zero() {
            F::zero()
        } else {
            (x - self.mean) / self.std
        }
    }

    fn fit(values: &[F]) -> Result<Self> {
        if values.is_empty() {
            return Err(CoreError::Data(
                "cannot fit normalization moments on an empty training slice".into(),
            ));
        }
        let n = real::<F>(values.len() as f64);
        let mean = values.iter().copied().sum::<F>() / n;
        let var = values
            .iter()
            .map(|&v| (v - mean) * (v - mean))
            .sum::<F>()
            / n;
        Ok(Moments {
            mean,
            std: var.sqrt(),
        })
    }
}

/// Training-range statistics used to normalize frame features. Only volume
/// is z-scored; returns and volatility keep their natural units and
/// sentiment is already bounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats<F> {
    pub volume: Moments<F>,
}

impl<F: Real> NormalizationStats<F> {
    /// Identity statistics (mean 0, std 1): features pass through unchanged.
    pub fn identity() -> Self {
        NormalizationStats {
            volume: Moments {
                mean: F::zero(),
                std: F::one(),
            },
        }
    }

    /// Fit on every (ticker, day) volume observation, forward fills
    /// included, whose date falls in `[start, end]`.
    pub fn fit(
        prices: &[PriceRecord],
        universe: &[EntityId],
        params: &FeatureParams,
        start: NaiveDate,
        end: NaiveDate,
    ) -> Result<Self> {
        if start > end {
            return Err(CoreError::Config(format!(
                "training range start {start} is after end {end}"
            )));
        }
        let calendar = trading_calendar(prices);
        let filled = forward_fill(prices, &calendar, params.ffill_limit)?;
        let mut volumes: Vec<F> = Vec::new();
        let in_universe: std::collections::BTreeSet<&EntityId> = universe.iter().collect();
        for rec in &filled {
            if rec.date >= start && rec.date <= end && in_universe.contains(&rec.ticker) {
                volumes.push(real(rec.volume));
            }
        }
        Ok(NormalizationStats {
            volume: Moments::fit(&volumes)?,
        })
    }
}

fn open_csv(path: &Path, want_header: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                CoreError::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, e))
            }
            _ => CoreError::Data(format!("{}: {e}", path.display())),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| CoreError::Data(format!("{}: {e}", path.display())))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != want_header {
        return Err(CoreError::malformed(
            path,
            1,
            format!("expected header {:?}, found {:?}", want_header.join(","), got.join(",")),
        ));
    }
    Ok(reader)
}

fn row_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_date(path: &Path, record: &csv::StringRecord, field: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(field, "%Y-%m-%d").map_err(|_| {
        CoreError::malformed(
            path,
            row_line(record),
            format!("bad date {field:?} (want YYYY-MM-DD)"),
        )
    })
}

fn parse_number(path: &Path, record: &csv::StringRecord, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| {
        CoreError::malformed(path, row_line(record), format!("bad {what} {field:?}"))
    })?;
    if !v.is_finite() {
        return Err(CoreError::malformed(
            path,
            row_line(record),
            format!("non-finite {what} {field:?}"),
        ));
    }
    Ok(v)
}

/// Load `date,ticker,close,volume` rows, validating and sorting by
/// (date, ticker).
pub fn load_prices(path: &Path) -> Result<Vec<PriceRecord>> {
    let mut reader = open_csv(path, &["date", "ticker", "close", "volume"])?;
    let mut out = Vec::new();
    for row in reader.records() {
        let record = row.map_err(|e| CoreError::Data(format!("{}: {e}", path.display())))?;
        if record.len() != 4 {
            return Err(CoreError::malformed(path, row_line(&record), "expected 4 fields"));
        }
        let date = parse_date(path, &record, &record[0])?;
        let ticker = EntityId::new(&record[1]);
        if record[1].is_empty() {
            return Err(CoreError::malformed(path, row_line(&record), "empty ticker"));
        }
        let close = parse_number(path, &record, &record[2], "close")?;
        if close <= 0.0 {
            return Err(CoreError::malformed(
                path,
                row_line(&record),
                format!("non-positive close {close}"),
            ));
        }
        let volume = parse_number(path, &record, &record[3], "volume")?;
        if volume < 0.0 {
            return Err(CoreError::malformed(
                path,
                row_line(&record),
                format!("negative volume {volume}"),
            ));
        }
        out.push(PriceRecord {
            date,
            ticker,
            close,
            volume,
        });
    }
    out.sort_by(|a, b| (a.date, &a.ticker).cmp(&(b.date, &b.ticker)));
    for pair in out.windows(2) {
        if pair[0].date == pair[1].date && pair[0].ticker == pair[1].ticker {
            return Err(CoreError::Data(format!(
                "duplicate price row for ({}, {})",
                pair[0].date, pair[0].ticker
            )));
        }
    }
    Ok(out)
}

/// Load `date,ticker,polarity` rows.
pub fn load_sentiment(path: &Path) -> Result<Vec<SentimentRecord>> {
    let mut reader = open_csv(path, &["date", "ticker", "polarity"])?;
    let mut out = Vec::new();
    for row in reader.records() {
        let record = row.map_err(|e| CoreError::Data(format!("{}: {e}", path.display())))?;
        if record.len() != 3 {
            return Err(CoreError::malformed(path, row_line(&record), "expected 3 fields"));
        }
        let date = parse_date(path, &record, &record[0])?;
        let polarity = parse_number(path, &record, &record[2], "polarity")?;
        if !(-1.0..=1.0).contains(&polarity) {
            return Err(CoreError::malformed(
                path,
                row_line(&record),
                format!("polarity {polarity} outside [-1, 1]"),
            ));
        }
        out.push(SentimentRecord {
            date,
            ticker: EntityId::new(&record[1]),
            polarity,
        });
    }
    out.sort_by(|a, b| (a.date, &a.ticker).cmp(&(b.date, &b.ticker)));
    Ok(out)
}

/// Load `date,indicator_id,value` rows; one value per indicator per day.
pub fn load_macro(path: &Path) -> Result<Vec<MacroRecord>> {
    let mut reader = open_csv(path, &["date", "indicator_id", "value"])?;
    let mut out = Vec::new();
    for row in reader.records() {
        let record = row.map_err(|e| CoreError::Data(format!("{}: {e}", path.display())))?;
        if record.len() != 3 {
            return Err(CoreError::malformed(path, row_line(&record), "expected 3 fields"));
        }
        let date = parse_date(path, &record, &record[0])?;
        let value = parse_number(path, &record, &record[2], "value")?;
        out.push(MacroRecord {
            date,
            indicator_id: EntityId::new(&record[1]),
            value,
        });
    }
    out.sort_by(|a, b| (a.date, &a.indicator_id).cmp(&(b.date, &b.indicator_id)));
    for pair in out.windows(2) {
        if pair[0].date == pair[1].date && pair[0].indicator_id == pair[1].indicator_id {
            return Err(CoreError::Data(format!(
                "duplicate macro row for ({}, {})",
                pair[0].date, pair[0].indicator_id
            )));
        }
    }
    Ok(out)
}

/// Distinct sorted dates appearing in the price file.
pub fn trading_calendar(prices: &[PriceRecord]) -> Vec<NaiveDate> {
    let mut dates: Vec<NaiveDate> = prices.iter().map(|p| p.date).collect();
    dates.sort();
    dates.dedup();
    dates
}

/// Fill gaps in each ticker's series along the trading calendar: a missing
/// day inside the ticker's observed range copies the previous close with
/// zero volume, for at most `limit` consecutive days per gap. The output is
/// sorted by (date, ticker).
pub fn forward_fill(
    prices: &[PriceRecord],
    calendar: &[NaiveDate],
    limit: usize,
) -> Result<Vec<PriceRecord>> {
    let mut by_ticker: BTreeMap<&EntityId, BTreeMap<NaiveDate, &PriceRecord>> = BTreeMap::new();
    for rec in prices {
        if by_ticker
            .entry(&rec.ticker)
            .or_default()
            .insert(rec.date, rec)
            .is_some()
        {
            return Err(CoreError::Data(format!(
                "duplicate price row for ({}, {})",
                rec.date, rec.ticker
            )));
        }
    }
    let mut out: Vec<PriceRecord> = Vec::with_capacity(prices.len());
    for (ticker, rows) in &by_ticker {
        let first = *rows.keys().next().expect("non-empty by construction");
        let last = *rows.keys().next_back().expect("non-empty by construction");
        let mut prev_close = None;
        let mut run = 0usize;
        for &day in calendar {
            if day < first || day > last {
                continue;
            }
            match rows.get(&day) {
                Some(rec) => {
                    out.push((*rec).clone());
                    prev_close = Some(rec.close);
                    run = 0;
                }
                None => {
                    run += 1;
                    if run <= limit {
                        let close = prev_close.expect("range starts at an observed day");
                        out.push(PriceRecord {
                            date: day,
                            ticker: (*ticker).clone(),
                            close,
                            volume: 0.0,
                        });
                        log::debug!("forward-filled {ticker} on {day}");
                    } else {
                        log::warn!("gap for {ticker} at {day} exceeds fill limit, day dropped");
                    }
                }
            }
        }
    }
    out.sort_by_key(|a| (a.date, a.ticker.clone()));
    Ok(out)
}

/// Per-ticker log returns between successive observations:
/// `ln(close_t / close_prev)`. The first observation of a ticker has no
/// entry; single-observation tickers are flagged.
pub fn compute_log_returns<F: Real>(prices: &[PriceRecord]) -> Result<LogReturns<F>> {
    let mut by_ticker: BTreeMap<EntityId, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    for rec in prices {
        if by_ticker
            .entry(rec.ticker.clone())
            .or_default()
            .insert(rec.date, rec.close)
            .is_some()
        {
            return Err(CoreError::Data(format!(
                "duplicate price row for ({}, {})",
                rec.date, rec.ticker
            )));
        }
    }
    let mut out = LogReturns::default();
    for (ticker, rows) in by_ticker {
        if rows.len() < 2 {
            log::warn!("ticker {ticker} has a single observation, no returns");
            out.flagged.push(ticker);
            continue;
        }
        let mut series = BTreeMap::new();
        let mut prev: Option<f64> = None;
        for (date, close) in rows {
            if let Some(p) = prev {
                let r = (close / p).ln();
                if !r.is_finite() {
                    return Err(CoreError::Data(format!(
                        "non-finite log return for {ticker} on {date}"
                    )));
                }
                series.insert(date, real::<F>(r));
            }
            prev = Some(close);
        }
        out.series.insert(ticker, series);
    }
    Ok(out)
}

/// Population standard deviation over each trailing window of `window`
/// returns. Output index `i` covers `returns[i .. i + window]`; the result
/// is empty until `window` returns exist.
pub fn rolling_volatility<F: Real>(returns: &[F], window: usize) -> Result<Vec<F>> {
    if window < 2 {
        return Err(CoreError::Config(format!(
            "volatility window must be at least 2, got {window}"
        )));
    }
    if returns.len() < window {
        return Ok(Vec::new());
    }
    let n = real::<F>(window as f64);
    let mut out = Vec::with_capacity(returns.len() + 1 - window);
    for chunk in returns.windows(window) {
        let mean = chunk.iter().copied().sum::<F>() / n;
        let var = chunk.iter().map(|&r| (r - mean) * (r - mean)).sum::<F>() / n;
        out.push(var.sqrt());
    }
    Ok(out)
}

/// Mean polarity for (date, ticker); exactly zero when nothing was said.
pub fn aggregate_sentiment<F: Real>(
    records: &[SentimentRecord],
    date: NaiveDate,
    ticker: &EntityId,
) -> F {
    let mut sum = 0.0;
    let mut count = 0usize;
    for rec in records {
        if rec.date == date && rec.ticker == *ticker {
            sum += rec.polarity;
            count += 1;
        }
    }
    if count == 0 {
        F::zero()
    } else {
        real(sum / count as f64)
    }
}

/// Build one frame per trading day from `min_history` onward.
///
/// An asset appears in a day's frame when it has a (possibly filled) price
/// that day, a log return, and a full volatility window behind it. Macro
/// indicators carry no per-day features; they join the analysis as graph
/// nodes through knowledge links, so this constructor does not consume
/// macro rows.
pub fn build_frames<F: Real>(
    prices: &[PriceRecord],
    sentiments: &[SentimentRecord],
    universe: &[EntityId],
    stats: &NormalizationStats<F>,
    params: &FeatureParams,
) -> Result<Vec<MarketFrame<F>>> {
    if prices.is_empty() {
        return Err(CoreError::Data("price file has no rows".into()));
    }
    let calendar = trading_calendar(prices);
    let have: std::collections::BTreeSet<&EntityId> = prices.iter().map(|p| &p.ticker).collect();
    for ticker in universe {
        if !have.contains(ticker) {
            return Err(CoreError::Data(format!(
                "universe ticker {ticker} has no price rows"
            )));
        }
    }

    let filled = forward_fill(prices, &calendar, params.ffill_limit)?;
    let returns: LogReturns<F> = compute_log_returns(&filled)?;

    // Per-ticker volatility aligned to the date of the window's last return.
    let mut vols: BTreeMap<&EntityId, BTreeMap<NaiveDate, F>> = BTreeMap::new();
    for (ticker, series) in &returns.series {
        let dates: Vec<NaiveDate> = series.keys().copied().collect();
        let values: Vec<F> = series.values().copied().collect();
        let stds = rolling_volatility(&values, params.vol_window)?;
        let aligned = vols.entry(ticker).or_default();
        for (k, std) in stds.into_iter().enumerate() {
            aligned.insert(dates[k + params.vol_window - 1], std);
        }
    }

    // Volume lookup from the filled series.
    let mut volumes: BTreeMap<(&EntityId, NaiveDate), f64> = BTreeMap::new();
    for rec in &filled {
        volumes.insert((&rec.ticker, rec.date), rec.volume);
    }

    // Pre-bucket sentiment to avoid a scan per (date, ticker).
    let mut polarity: BTreeMap<(NaiveDate, &EntityId), (f64, usize)> = BTreeMap::new();
    for rec in sentiments {
        let slot = polarity.entry((rec.date, &rec.ticker)).or_insert((0.0, 0));
        slot.0 += rec.polarity;
        slot.1 += 1;
    }

    let mut frames = Vec::new();
    for (idx, &day) in calendar.iter().enumerate() {
        if idx < params.min_history {
            continue;
        }
        let mut features = BTreeMap::new();
        for ticker in universe {
            let ret = returns.series.get(ticker).and_then(|s| s.get(&day));
            let vol = vols.get(ticker).and_then(|s| s.get(&day));
            let volume = volumes.get(&(ticker, day));
            let (ret, vol, volume) = match (ret, vol, volume) {
                (Some(&r), Some(&v), Some(&q)) => (r, v, q),
                _ => continue,
            };
            let sentiment = match polarity.get(&(day, ticker)) {
                Some(&(sum, count)) => real::<F>(sum / count as f64),
                None => F::zero(),
            };
            let fv = FeatureVector {
                log_return: ret,
                realised_vol: vol,
                volume_z: stats.volume.z(real(volume)),
                sentiment,
            };
            for (name, value) in [
                ("log_return", fv.log_return),
                ("realised_vol", fv.realised_vol),
                ("volume_z", fv.volume_z),
                ("sentiment", fv.sentiment),
            ] {
                if !value.is_finite() {
                    return Err(CoreError::Data(format!(
                        "non-finite {name} for {ticker} on {day} ({})",
                        to_f64(value)
                    )));
                }
            }
            features.insert(ticker.clone(), fv);
        }
        frames.push(MarketFrame { date: day, features });
    }
    Ok(frames)
}
