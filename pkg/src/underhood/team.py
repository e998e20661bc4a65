"""Utterance-only team fabric.

Nothing structured ever crosses between agents: the only channel is natural
language text. A human utterance is broadcast to every robot; a robot
utterance is point-to-point. Delivery is queued with a fixed latency and
drained in a deterministic order, so reruns see identical inboxes.
"""

from __future__ import annotations

from dataclasses import dataclass


class TeamError(ValueError):
    """Unknown participant or a malformed send."""


@dataclass(frozen=True)
class Message:
    msg_id: str
    sender: str
    recipients: tuple
    text: str
    send_tick: int
    deliver_tick: int

    @property
    def num(self) -> int:
        return int(self.msg_id.split(".")[1])


class TeamFabric:
    def __init__(self, robots, humans, latency: int = 1):
        self.robots = list(robots)
        self.humans = list(humans)
        if latency < 1:
            raise TeamError("latency must be at least 1")
        self.latency = latency
        self._queued: list = []  # (sender, recipients, text) awaiting flush
        self._in_flight: list = []
        self._inboxes: dict[str, list] = {r: [] for r in self.robots}
        self._next_id = 1

    def _known(self, name: str) -> bool:
        return name in self.robots or name in self.humans

    def submit(self, sender: str, text: str, to: str | None = None) -> None:
        """Queue an utterance; it becomes a message at the next flush."""
        if not self._known(sender):
            raise TeamError(f"unknown sender {sender!r}")
        if not text or not text.strip():
            raise TeamError("empty utterance")
        if sender in self.humans:
            if to is not None:
                raise TeamError("human utterances broadcast; no recipient")
            recipients = tuple(self.robots)
        else:
            if to is None:
                raise TeamError(f"robot {sender} must address someone")
            if not self._known(to) or to == sender:
                raise TeamError(f"bad recipient {to!r}")
            recipients = (to,)
        self._queued.append((sender, recipients, text))

    def flush(self, tick: int) -> list:
        """Stamp queued utterances as messages sent this tick."""
        out = []
        for sender, recipients, text in self._queued:
            msg = Message(
                f"msg.{self._next_id}", sender, recipients, text,
                send_tick=tick, deliver_tick=tick + self.latency,
            )
            self._next_id += 1
            self._in_flight.append(msg)
            out.append(msg)
        self._queued.clear()
        return out

    def deliver_due(self, tick: int) -> list:
        """Move due messages into robot inboxes, in a fixed total order."""
        due = [m for m in self._in_flight if m.deliver_tick <= tick]
        due.sort(key=lambda m: (m.deliver_tick, m.sender, m.num))
        for msg in due:
            self._in_flight.remove(msg)
            for r in msg.recipients:
                if r in self._inboxes:
                    self._inboxes[r].append(msg)
        return due

    def take(self, robot: str) -> list:
        if robot not in self._inboxes:
            raise TeamError(f"no inbox for {robot!r}")
        out = self._inboxes[robot]
        self._inboxes[robot] = []
        return out

    def idle(self) -> bool:
        """True when nothing is queued, flying, or waiting to be read."""
        return (not self._queued and not self._in_flight
                and all(not box for box in self._inboxes.values()))
