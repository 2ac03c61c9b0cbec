use std::io::{BufReader, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::wire::{read_frame, write_frame, Frame, Message, QueryMessage, ReportMessage, DEFAULT_FRAME_LIMIT};
use crate::dataset::EmbeddingSet;
use crate::error::{Error, Result};
use crate::measures::{seller_report, ReportConfig};

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub seller_id: String,
    pub report: ReportConfig,
    pub frame_limit: usize,
    /// Idle time after which a connection is dropped.
    pub idle_timeout: Duration,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            seller_id: "seller".into(),
            report: ReportConfig::default(),
            frame_limit: DEFAULT_FRAME_LIMIT,
            idle_timeout: Duration::from_secs(30),
        }
    }
}

/// Answers one query message against the seller's data.
pub fn answer(seller: &EmbeddingSet, config: &ServeConfig, msg: &QueryMessage) -> Result<ReportMessage> {
    let q = msg.to_query()?;
    let report_cfg = ReportConfig {
        omega: msg.omega.or(config.report.omega),
        ..config.report
    };
    let report = seller_report(seller, &q, &report_cfg)?;
    Ok(ReportMessage::from_report(
        &report,
        &msg.query_id,
        &config.seller_id,
        &msg.kinds,
    ))
}

/// A running seller endpoint. Dropping it stops the accept loop.
pub struct SellerService {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl SellerService {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the service is shut down from another thread.
    pub fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        if self.stop.swap(true, Ordering::SeqCst) {
            return;
        }
        // wake the blocking accept
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_millis(500));
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for SellerService {
    fn drop(&mut self) {
        self.stop_accepting();
    }
}

/// Binds `addr` and serves reports for `seller`, one thread per connection.
pub fn serve_seller<A: ToSocketAddrs>(addr: A, seller: EmbeddingSet, config: ServeConfig) -> Result<SellerService> {
    if seller.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let shared = Arc::new((seller, config));
    let stop_flag = Arc::clone(&stop);
    let accept = thread::Builder::new().name("seller-accept".into()).spawn(move || {
        for conn in listener.incoming() {
            if stop_flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = conn else { continue };
            let shared = Arc::clone(&shared);
            let _ = thread::Builder::new()
                .name("seller-conn".into())
                .spawn(move || handle_connection(stream, &shared.0, &shared.1));
        }
    })?;
    Ok(SellerService {
        addr: local,
        stop,
        accept: Some(accept),
    })
}

fn handle_connection(stream: TcpStream, seller: &EmbeddingSet, config: &ServeConfig) {
    let _ = stream.set_read_timeout(Some(config.idle_timeout));
    let _ = stream.set_nodelay(true);
    let Ok(write_half) = stream.try_clone() else { return };
    let mut reader = BufReader::new(&stream);
    let mut writer = BufWriter::new(write_half);
    loop {
        let reply = match read_frame(&mut reader, config.frame_limit) {
            Ok(Frame::Closed) => break,
            Ok(Frame::Message(Message::Query(q))) => match answer(seller, config, &q) {
                Ok(report) => Message::Report(report),
                Err(e) => Message::Error { message: e.to_string() },
            },
            Ok(Frame::Message(_)) => Message::Error {
                message: "protocol error: expected a query message".into(),
            },
            Err(Error::Io(_)) => break,
            Err(e) => {
                // malformed or oversized input: report and drop this connection
                let _ = write_frame(&mut writer, &Message::Error { message: e.to_string() });
                break;
            }
        };
        let failed = matches!(reply, Message::Error { .. });
        if write_frame(&mut writer, &reply).is_err() || failed {
            break;
        }
    }
    let _ = stream.shutdown(Shutdown::Both);
}
