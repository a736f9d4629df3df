//! Session server. One port carries both transports: connections that open
//! with an HTTP `GET` are upgraded to WebSocket at `/session`, anything else
//! is newline-delimited JSON.

use std::time::{Duration, Instant};

use anyhow::{anyhow, Context};
use futures_util::{future, sink, stream, Sink, SinkExt, Stream, StreamExt};
use sgs_core::session::{Clock, Session};
use sgs_core::EngineConfig;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio_tungstenite::tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tokio_tungstenite::tungstenite::http::StatusCode;
use tokio_tungstenite::tungstenite::Message;

pub const WS_PATH: &str = "/session";

pub fn run(host: &str, port: u16, config: EngineConfig, clock: Clock) -> anyhow::Result<()> {
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = TcpListener::bind((host, port)).await.with_context(|| format!("bind {host}:{port}"))?;
        // Tests and wrappers read the bound address from this line.
        println!("listening on {}", listener.local_addr()?);
        loop {
            let (socket, peer) = listener.accept().await?;
            let config = config.clone();
            tokio::spawn(async move {
                if let Err(e) = connection(socket, config, clock).await {
                    eprintln!("sgs: session {peer}: {e:#}");
                }
            });
        }
    })
}

async fn connection(socket: TcpStream, config: EngineConfig, clock: Clock) -> anyhow::Result<()> {
    socket.set_nodelay(true)?;
    if is_http(&socket).await? {
        serve_ws(socket, config, clock).await
    } else {
        serve_tcp(socket, config, clock).await
    }
}

async fn is_http(socket: &TcpStream) -> anyhow::Result<bool> {
    let mut buf = [0u8; 4];
    for _ in 0..400 {
        let n = socket.peek(&mut buf).await?;
        if n == 0 {
            return Ok(false);
        }
        if n == buf.len() || !b"GET ".starts_with(&buf[..n]) {
            return Ok(&buf[..n] == b"GET ");
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    Ok(false)
}

async fn serve_tcp(socket: TcpStream, config: EngineConfig, clock: Clock) -> anyhow::Result<()> {
    let (read, write) = socket.into_split();
    let incoming = stream::unfold(BufReader::new(read).lines(), |mut lines| async move {
        match lines.next_line().await {
            Ok(Some(line)) if line.trim().is_empty() => Some((Ok(None), lines)),
            Ok(Some(line)) => Some((Ok(Some(line)), lines)),
            Ok(None) => None,
            Err(e) => Some((Err(anyhow::Error::from(e)), lines)),
        }
    });
    let outgoing = sink::unfold(write, |mut w, mut line: String| async move {
        line.push('\n');
        w.write_all(line.as_bytes()).await?;
        Ok::<_, anyhow::Error>(w)
    });
    drive(Box::pin(incoming), Box::pin(outgoing), Session::new(config, clock)).await
}

async fn serve_ws(socket: TcpStream, config: EngineConfig, clock: Clock) -> anyhow::Result<()> {
    let check_path = |req: &Request, resp: Response| -> Result<Response, ErrorResponse> {
        if req.uri().path() == WS_PATH {
            Ok(resp)
        } else {
            let mut err = ErrorResponse::new(Some(format!("no endpoint at {}", req.uri().path())));
            *err.status_mut() = StatusCode::NOT_FOUND;
            Err(err)
        }
    };
    let ws = tokio_tungstenite::accept_hdr_async(socket, check_path).await?;
    let (write, read) = ws.split();
    let incoming = read.map(|msg| match msg {
        Ok(Message::Text(text)) => Ok(Some(text.to_string())),
        Ok(Message::Binary(_)) => Err(anyhow!("binary messages are not supported")),
        Ok(_) => Ok(None),
        Err(e) => Err(e.into()),
    });
    let outgoing = write
        .sink_map_err(anyhow::Error::from)
        .with(|line: String| future::ready(Ok::<_, anyhow::Error>(Message::text(line))));
    drive(incoming, Box::pin(outgoing), Session::new(config, clock)).await
}

/// Pumps one session. Items of `incoming` are raw messages; `Ok(None)` is
/// transport noise to skip.
async fn drive<I, O>(mut incoming: I, mut outgoing: O, mut session: Session) -> anyhow::Result<()>
where
    I: Stream<Item = anyhow::Result<Option<String>>> + Unpin,
    O: Sink<String, Error = anyhow::Error> + Unpin,
{
    let start = Instant::now();
    let wall = session.clock() == Clock::Wall;
    let mut ticker = tokio::time::interval(Duration::from_secs_f64(session.tick_interval()));
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);

    while !session.is_closed() {
        let replies = tokio::select! {
            msg = incoming.next() => match msg {
                None => break,
                Some(Err(e)) => return Err(e),
                Some(Ok(None)) => continue,
                Some(Ok(Some(text))) => session.handle_text(&text, start.elapsed().as_secs_f64()),
            },
            _ = ticker.tick(), if wall => session.tick(start.elapsed().as_secs_f64()),
        };
        for env in replies {
            outgoing.feed(env.to_line()).await?;
        }
        outgoing.flush().await?;
    }
    outgoing.close().await
}
