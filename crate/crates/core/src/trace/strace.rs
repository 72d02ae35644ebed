//! `strace -f` text output.

use std::collections::{BTreeSet, HashMap, VecDeque};

use once_cell::sync::Lazy;
use regex::Regex;

use super::TraceError;
use crate::report::{AppId, FeatureKind, FeatureRecord, FeatureReport, Source};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyscallTrace {
    pub app_id: AppId,
    /// `(pid, syscall name)` in trace order.
    pub calls: Vec<(u32, String)>,
}

impl SyscallTrace {
    pub fn names(&self) -> Vec<String> {
        self.calls.iter().map(|(_, n)| n.clone()).collect()
    }

    pub fn to_report(&self) -> FeatureReport {
        let mut r = FeatureReport::new(self.app_id.clone(), Source::Dynamic);
        for (_, name) in &self.calls {
            if let Ok(rec) = FeatureRecord::new(FeatureKind::SyscallName, name.clone()) {
                r.insert(rec);
            }
        }
        r
    }
}

/// Which processes of the trace belong to the application.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetFilter {
    /// These pids and everything they fork.
    Pids(BTreeSet<u32>),
    /// Pids whose syscall arguments mention the package name, and
    /// everything they fork.
    Package(String),
    /// Every process in the trace.
    All,
}

static PREFIX: Lazy<Regex> = Lazy::new(|| {
    Regex::new(
        r"^\s*(?:\[pid\s+(\d+)\]\s*|(\d+)\s+)?(?:(?:\d+:\d+:\d+(?:\.\d+)?|\d+\.\d+)\s+)?(.*)$",
    )
    .unwrap()
});
static COMPLETE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^([a-z_][a-z0-9_]*)\((.*)\)\s+=\s+(\S+)(?:\s.*)?$").unwrap());
static UNFINISHED: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^([a-z_][a-z0-9_]*)\((.*?)\s*<unfinished \.\.\.>$").unwrap());
static RESUMED: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"^<\.\.\. ([a-z_][a-z0-9_]*) resumed>(.*?)\)?\s+=\s+(\S+)(?:\s.*)?$").unwrap()
});
static RESUMED_BARE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^<\.\.\. ([a-z_][a-z0-9_]*) resumed>.*$").unwrap());

const FORKS: [&str; 4] = ["fork", "vfork", "clone", "clone3"];

struct Call {
    pid: u32,
    name: String,
    args: String,
    ret: Option<String>,
}

enum Line {
    Skip,
    Call(Call),
    Unfinished(Call),
    Resumed {
        pid: u32,
        name: String,
        args: String,
        ret: Option<String>,
    },
}

fn classify(line: &str) -> Option<Line> {
    if line.trim().is_empty() || line.starts_with("strace: ") {
        return Some(Line::Skip);
    }
    let caps = PREFIX.captures(line)?;
    let pid: u32 = caps
        .get(1)
        .or_else(|| caps.get(2))
        .map_or(Some(0), |m| m.as_str().parse().ok())?;
    let body = caps.get(3).map_or("", |m| m.as_str()).trim_end();
    if (body.starts_with("--- ") && body.ends_with(" ---"))
        || (body.starts_with("+++ ") && body.ends_with(" +++"))
    {
        return Some(Line::Skip);
    }
    if let Some(c) = UNFINISHED.captures(body) {
        return Some(Line::Unfinished(Call {
            pid,
            name: c[1].to_string(),
            args: c[2].to_string(),
            ret: None,
        }));
    }
    if let Some(c) = RESUMED.captures(body) {
        return Some(Line::Resumed {
            pid,
            name: c[1].to_string(),
            args: c[2].to_string(),
            ret: Some(c[3].to_string()),
        });
    }
    if let Some(c) = RESUMED_BARE.captures(body) {
        return Some(Line::Resumed {
            pid,
            name: c[1].to_string(),
            args: String::new(),
            ret: None,
        });
    }
    if let Some(c) = COMPLETE.captures(body) {
        return Some(Line::Call(Call {
            pid,
            name: c[1].to_string(),
            args: c[2].to_string(),
            ret: Some(c[3].to_string()),
        }));
    }
    None
}

pub fn parse_strace_text(
    text: &str,
    app_id: AppId,
    filter: &TargetFilter,
) -> Result<SyscallTrace, TraceError> {
    // Slots keep the position of the unfinished half so merged calls stay
    // in issue order.
    let mut slots: Vec<Option<Call>> = Vec::new();
    let mut pending: HashMap<(u32, String), usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        match classify(raw).ok_or(TraceError::MalformedTraceLine { line: i + 1 })? {
            Line::Skip => {}
            Line::Call(c) => slots.push(Some(c)),
            Line::Unfinished(c) => {
                pending.insert((c.pid, c.name.clone()), slots.len());
                slots.push(Some(c));
            }
            Line::Resumed {
                pid,
                name,
                args,
                ret,
            } => match pending.remove(&(pid, name.clone())) {
                Some(at) => {
                    if let Some(c) = slots[at].as_mut() {
                        c.args.push_str(&args);
                        c.ret = ret;
                    }
                }
                None => slots.push(Some(Call {
                    pid,
                    name,
                    args,
                    ret,
                })),
            },
        }
    }
    let calls: Vec<Call> = slots.into_iter().flatten().collect();

    let mut children: HashMap<u32, Vec<u32>> = HashMap::new();
    for c in &calls {
        if FORKS.contains(&c.name.as_str()) {
            if let Some(child) = c
                .ret
                .as_deref()
                .and_then(|r| r.parse::<u32>().ok())
                .filter(|&p| p > 0)
            {
                children.entry(c.pid).or_default().push(child);
            }
        }
    }
    let seeds: BTreeSet<u32> = match filter {
        TargetFilter::Pids(p) => p.clone(),
        TargetFilter::Package(pkg) => calls
            .iter()
            .filter(|c| !pkg.is_empty() && c.args.contains(pkg.as_str()))
            .map(|c| c.pid)
            .collect(),
        TargetFilter::All => calls.iter().map(|c| c.pid).collect(),
    };
    let mut closure = seeds.clone();
    let mut queue: VecDeque<u32> = seeds.into_iter().collect();
    while let Some(p) = queue.pop_front() {
        for &ch in children.get(&p).map(Vec::as_slice).unwrap_or(&[]) {
            if closure.insert(ch) {
                queue.push_back(ch);
            }
        }
    }
    Ok(SyscallTrace {
        app_id,
        calls: calls
            .into_iter()
            .filter(|c| closure.contains(&c.pid))
            .map(|c| (c.pid, c.name))
            .collect(),
    })
}
