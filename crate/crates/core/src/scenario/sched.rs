//! Runs a set of workers either as a discrete-event simulation on a manual
//! clock or as OS threads on the wall clock.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::report::OpRecord;
use crate::clock::{Clock, ManualClock};

/// A worker issuing operations at scheduled times.
pub(crate) trait Actor: Send {
    /// Time of the next operation, `None` once done.
    fn next_at(&self) -> Option<u64>;
    /// Performs the operation due now and schedules the next one.
    fn fire(&mut self, time: &Time);
    fn take_records(&mut self) -> Vec<OpRecord>;
}

/// The time source of a run.
#[derive(Clone)]
pub(crate) enum Time {
    Virtual { clock: Arc<ManualClock>, speedup: Option<f64> },
    Real { clock: Arc<dyn Clock> },
}

impl Time {
    pub fn now(&self) -> u64 {
        match self {
            Time::Virtual { clock, .. } => clock.now_us(),
            Time::Real { clock } => clock.now_us(),
        }
    }

    /// End time of an operation that began at `start`: the modeled cost in
    /// virtual time, the measured one otherwise.
    pub fn finish(&self, start: u64, modeled_us: u64) -> u64 {
        match self {
            Time::Virtual { .. } => start + modeled_us,
            Time::Real { clock } => clock.now_us().max(start),
        }
    }

    /// Lets `dt` pass: advances the manual clock or sleeps.
    pub fn pass(&self, dt: u64) {
        match self {
            Time::Virtual { clock, .. } => {
                clock.advance(dt);
            }
            Time::Real { .. } => std::thread::sleep(Duration::from_micros(dt)),
        }
    }

    /// Moves a virtual clock to `t`; a real clock is waited on.
    pub fn reach(&self, t: u64) {
        match self {
            Time::Virtual { clock, .. } => clock.set(t),
            Time::Real { clock } => {
                let now = clock.now_us();
                if t > now {
                    std::thread::sleep(Duration::from_micros(t - now));
                }
            }
        }
    }
}

/// Outcome of [`run`]: all records, and the reason the run is invalid if a
/// worker panicked.
pub(crate) struct RunOutput {
    pub records: Vec<OpRecord>,
    pub panic: Option<String>,
}

fn panic_message(worker: usize, p: Box<dyn std::any::Any + Send>) -> String {
    let msg = p
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into());
    format!("worker {worker} panicked: {msg}")
}

pub(crate) fn run(time: &Time, mut actors: Vec<Box<dyn Actor>>) -> RunOutput {
    let mut panic = None;
    match time {
        Time::Virtual { clock, speedup } => {
            let wall = Instant::now();
            let origin = clock.now_us();
            let mut alive = vec![true; actors.len()];
            loop {
                let due = actors
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| alive[*i])
                    .filter_map(|(i, a)| a.next_at().map(|t| (t, i)))
                    .min();
                let Some((t, i)) = due else { break };
                clock.set(t);
                if let Some(s) = speedup {
                    let target = Duration::from_secs_f64(t.saturating_sub(origin) as f64 / 1e6 / s);
                    if let Some(wait) = target.checked_sub(wall.elapsed()) {
                        std::thread::sleep(wait);
                    }
                }
                if let Err(p) = catch_unwind(AssertUnwindSafe(|| actors[i].fire(time))) {
                    alive[i] = false;
                    panic.get_or_insert(panic_message(i, p));
                }
            }
        }
        Time::Real { .. } => {
            let results: Vec<Option<String>> = std::thread::scope(|s| {
                let handles: Vec<_> = actors
                    .iter_mut()
                    .enumerate()
                    .map(|(i, a)| {
                        s.spawn(move || {
                            while let Some(t) = a.next_at() {
                                time.reach(t);
                                if let Err(p) = catch_unwind(AssertUnwindSafe(|| a.fire(time))) {
                                    return Some(panic_message(i, p));
                                }
                            }
                            None
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Some("worker thread lost".into()))).collect()
            });
            panic = results.into_iter().flatten().next();
        }
    }
    let records = actors.iter_mut().flat_map(|a| a.take_records()).collect();
    RunOutput { records, panic }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::SystemClock;
    use crate::scenario::report::{OpKind, Outcome};

    /// Fires every `period` until `count` operations, each lasting `cost`.
    struct Ticker {
        id: u32,
        next: Option<u64>,
        period: u64,
        cost: u64,
        left: u32,
        out: Vec<OpRecord>,
        explode_at: Option<u32>,
    }

    impl Actor for Ticker {
        fn next_at(&self) -> Option<u64> {
            self.next
        }

        fn fire(&mut self, time: &Time) {
            if self.explode_at == Some(self.left) {
                panic!("boom");
            }
            let start = time.now();
            let end = time.finish(start, self.cost);
            let mut r = OpRecord::new(OpKind::Read, start, end, Outcome::Ok);
            r.worker = self.id;
            r.seq = self.out.len() as u32;
            self.out.push(r);
            self.left -= 1;
            let slot = self.next.unwrap() + self.period;
            self.next = (self.left > 0).then_some(slot.max(end));
        }

        fn take_records(&mut self) -> Vec<OpRecord> {
            std::mem::take(&mut self.out)
        }
    }

    fn ticker(id: u32, period: u64, cost: u64, left: u32) -> Box<dyn Actor> {
        Box::new(Ticker { id, next: Some(0), period, cost, left, out: Vec::new(), explode_at: None })
    }

    fn virtual_time() -> Time {
        Time::Virtual { clock: Arc::new(ManualClock::new(0)), speedup: None }
    }

    #[test]
    fn virtual_run_interleaves_by_time() {
        let out = run(&virtual_time(), vec![ticker(0, 10, 1, 3), ticker(1, 15, 1, 3)]);
        let mut starts: Vec<(u64, u32)> = out.records.iter().map(|r| (r.start_us, r.worker)).collect();
        starts.sort();
        assert_eq!(starts, vec![(0, 0), (0, 1), (10, 0), (15, 1), (20, 0), (30, 1)]);
        assert!(out.panic.is_none());
    }

    #[test]
    fn slow_operations_push_the_schedule_back() {
        let out = run(&virtual_time(), vec![ticker(0, 10, 25, 3)]);
        let starts: Vec<u64> = out.records.iter().map(|r| r.start_us).collect();
        assert_eq!(starts, vec![0, 25, 50]);
    }

    #[test]
    fn panicking_worker_is_reported_and_others_finish() {
        let bad = Ticker { id: 1, next: Some(0), period: 10, cost: 1, left: 3, out: Vec::new(), explode_at: Some(2) };
        let out = run(&virtual_time(), vec![ticker(0, 10, 1, 3), Box::new(bad)]);
        assert!(out.panic.as_deref().unwrap().contains("boom"));
        assert_eq!(out.records.iter().filter(|r| r.worker == 0).count(), 3);
        assert_eq!(out.records.iter().filter(|r| r.worker == 1).count(), 1);
    }

    #[test]
    fn speedup_paces_virtual_time() {
        let time = Time::Virtual { clock: Arc::new(ManualClock::new(0)), speedup: Some(10.0) };
        let wall = Instant::now();
        run(&time, vec![ticker(0, 100_000, 1, 3)]);
        // The last operation is at 0.2 virtual seconds.
        assert!(wall.elapsed() >= Duration::from_millis(19));
    }

    #[test]
    fn real_threads_follow_the_schedule() {
        let clock: Arc<dyn Clock> = Arc::new(SystemClock::new());
        let out = run(&Time::Real { clock }, vec![ticker(0, 20_000, 0, 3), ticker(1, 20_000, 0, 3)]);
        assert_eq!(out.records.len(), 6);
        for r in &out.records {
            let slot = r.seq as u64 * 20_000;
            assert!(r.start_us >= slot, "{r:?}");
        }
    }
}
