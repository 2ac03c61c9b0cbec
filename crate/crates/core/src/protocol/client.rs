use std::io::{self, BufReader};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::time::Duration;

use super::wire::{read_frame, write_frame, Frame, Message, QueryMessage, ReportMessage, DEFAULT_FRAME_LIMIT};
use crate::error::{Error, Result};

fn resolve<A: ToSocketAddrs>(addr: A) -> Result<SocketAddr> {
    addr.to_socket_addrs()?
        .next()
        .ok_or_else(|| Error::InvalidArgument("address resolved to nothing".into()))
}

fn classify(e: io::Error, addr: SocketAddr, timeout: Duration) -> Error {
    match e.kind() {
        io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock => Error::Timeout(timeout.as_millis() as u64),
        io::ErrorKind::ConnectionRefused => Error::ConnectionRefused(addr.to_string()),
        _ => Error::Io(e),
    }
}

/// Sends one query and waits for the matching report.
///
/// Failures come back as distinct variants: [`Error::Timeout`],
/// [`Error::ConnectionRefused`], [`Error::Schema`] for anything malformed,
/// and [`Error::Remote`] when the seller answered with an error message.
pub fn query_seller<A: ToSocketAddrs>(addr: A, msg: &QueryMessage, timeout: Duration) -> Result<ReportMessage> {
    let addr = resolve(addr)?;
    let stream = TcpStream::connect_timeout(&addr, timeout).map_err(|e| classify(e, addr, timeout))?;
    stream.set_read_timeout(Some(timeout))?;
    stream.set_write_timeout(Some(timeout))?;
    let _ = stream.set_nodelay(true);
    let mut writer = &stream;
    write_frame(&mut writer, &Message::Query(msg.clone())).map_err(|e| match e {
        Error::Io(io) => classify(io, addr, timeout),
        other => other,
    })?;
    let mut reader = BufReader::new(&stream);
    let reply = match read_frame(&mut reader, DEFAULT_FRAME_LIMIT) {
        Ok(Frame::Message(m)) => m,
        Ok(Frame::Closed) => return Err(Error::Schema("connection closed without a reply".into())),
        Err(Error::Io(io)) => return Err(classify(io, addr, timeout)),
        Err(Error::Protocol(p)) => return Err(Error::Schema(p)),
        Err(other) => return Err(other),
    };
    match reply {
        Message::Report(r) => {
            if r.query_id != msg.query_id {
                return Err(Error::Schema(format!(
                    "reply for query '{}' while waiting for '{}'",
                    r.query_id, msg.query_id
                )));
            }
            r.validate(msg.k, msg.d)?;
            Ok(r)
        }
        Message::Error { message } => Err(Error::Remote(message)),
        Message::Query(_) => Err(Error::Schema("seller sent a query".into())),
    }
}
