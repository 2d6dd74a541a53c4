use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

/// Per-host politeness gate.
///
/// Requests to one host are serialized, and each one starts at least
/// `interval` after the previous one to that host completed.
#[derive(Debug, Default)]
pub struct HostLimiter {
    interval: Duration,
    hosts: Mutex<HashMap<String, Arc<Mutex<Option<Instant>>>>>,
}

impl HostLimiter {
    pub fn new(interval: Duration) -> Self {
        Self {
            interval,
            hosts: Mutex::new(HashMap::new()),
        }
    }

    fn slot(&self, host: &str) -> Arc<Mutex<Option<Instant>>> {
        let mut hosts = self.hosts.lock().unwrap_or_else(|e| e.into_inner());
        hosts.entry(host.to_owned()).or_default().clone()
    }

    pub fn run<T>(&self, host: &str, f: impl FnOnce() -> T) -> T {
        let slot = self.slot(host);
        let mut last = slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(done) = *last {
            let ready = done + self.interval;
            let now = Instant::now();
            if ready > now {
                thread::sleep(ready - now);
            }
        }
        let out = f();
        *last = Some(Instant::now());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spaces_same_host_calls() {
        let lim = HostLimiter::new(Duration::from_millis(30));
        let mut starts = vec![];
        for _ in 0..3 {
            lim.run("a", || starts.push(Instant::now()));
        }
        for w in starts.windows(2) {
            assert!(w[1] - w[0] >= Duration::from_millis(30));
        }
    }

    #[test]
    fn other_hosts_do_not_wait() {
        let lim = HostLimiter::new(Duration::from_secs(5));
        let t0 = Instant::now();
        lim.run("a", || ());
        lim.run("b", || ());
        assert!(t0.elapsed() < Duration::from_secs(1));
    }
}
