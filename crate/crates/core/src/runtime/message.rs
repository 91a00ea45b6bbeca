use crate::cim::NodeRecord;
use crate::dtd::WaveReport;

pub type WorkerId = usize;

/// Which kind of steal a REQUEST belongs to; replies echo it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StealKind {
    Random,
    Lifeline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    Request,
    Reject,
    Give,
    ControlUp,
    ControlDown,
    Finish,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Request(StealKind),
    Reject(StealKind),
    /// `reply` is `None` for a push to a waiting lifeline thief.
    Give {
        nodes: Vec<NodeRecord>,
        reply: Option<StealKind>,
    },
    ControlUp(WaveReport),
    ControlDown {
        wave: u32,
        lambda: u32,
    },
    Finish,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub source: WorkerId,
    /// Sender's detector clock; meaningful on basic messages only.
    pub timestamp: u32,
    pub body: Body,
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self.body {
            Body::Request(_) => MessageKind::Request,
            Body::Reject(_) => MessageKind::Reject,
            Body::Give { .. } => MessageKind::Give,
            Body::ControlUp(_) => MessageKind::ControlUp,
            Body::ControlDown { .. } => MessageKind::ControlDown,
            Body::Finish => MessageKind::Finish,
        }
    }

    /// Basic messages are counted by termination detection; control
    /// messages implement it.
    pub fn is_basic(&self) -> bool {
        matches!(
            self.kind(),
            MessageKind::Request | MessageKind::Reject | MessageKind::Give
        )
    }

    pub fn give_len(&self) -> usize {
        match &self.body {
            Body::Give { nodes, .. } => nodes.len(),
            _ => 0,
        }
    }
}

/// Where a worker's outgoing messages go.
pub trait Outbox {
    fn send(&mut self, to: WorkerId, msg: Message);
}

impl Outbox for Vec<(WorkerId, Message)> {
    fn send(&mut self, to: WorkerId, msg: Message) {
        self.push((to, msg));
    }
}
