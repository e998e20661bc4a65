"""Message fabric: broadcast rules, latency, deterministic drain order."""

import pytest

from underhood.team import Message, TeamError, TeamFabric


def fabric(latency=1):
    return TeamFabric(["UGV-U", "DRONE-D"], ["DANNY"], latency=latency)


def test_human_utterances_broadcast_to_all_robots():
    f = fabric()
    f.submit("DANNY", "Find my keys, they are somewhere in the apartment.")
    (msg,) = f.flush(1)
    assert msg.msg_id == "msg.1"
    assert msg.sender == "DANNY"
    assert msg.recipients == ("UGV-U", "DRONE-D")
    assert (msg.send_tick, msg.deliver_tick) == (1, 2)
    assert f.deliver_due(1) == []
    assert f.deliver_due(2) == [msg]
    assert f.take("UGV-U") == [msg]
    assert f.take("DRONE-D") == [msg]
    assert f.take("UGV-U") == []  # taking clears
    assert f.idle()


def test_robot_utterances_are_point_to_point():
    f = fabric()
    f.submit("UGV-U", "Please search the kitchen and the bathroom.", to="DRONE-D")
    f.submit("UGV-U", "What do the keys look like?", to="DANNY")
    sent = f.flush(2)
    assert [m.msg_id for m in sent] == ["msg.1", "msg.2"]
    assert sent[0].recipients == ("DRONE-D",)
    assert sent[1].recipients == ("DANNY",)
    delivered = f.deliver_due(3)
    assert [m.msg_id for m in delivered] == ["msg.1", "msg.2"]
    assert f.take("DRONE-D") == [sent[0]]
    # Humans have no inbox; their traffic lives on the trace.
    with pytest.raises(TeamError):
        f.take("DANNY")
    assert f.idle()


def test_drain_order_is_tick_sender_then_id():
    f = fabric()
    f.submit("UGV-U", "to drone", to="DRONE-D")
    f.submit("DANNY", "to everyone")
    f.submit("UGV-U", "again", to="DRONE-D")
    f.flush(5)
    delivered = f.deliver_due(6)
    assert [(m.sender, m.msg_id) for m in delivered] == [
        ("DANNY", "msg.2"), ("UGV-U", "msg.1"), ("UGV-U", "msg.3"),
    ]
    assert [m.text for m in f.take("DRONE-D")] == ["to everyone", "to drone", "again"]


def test_latency_spaces_out_delivery():
    f = fabric(latency=3)
    f.submit("DANNY", "hello")
    f.flush(1)
    assert f.deliver_due(2) == [] and f.deliver_due(3) == []
    assert len(f.deliver_due(4)) == 1
    assert not f.idle()  # still sitting unread in inboxes
    f.take("UGV-U")
    f.take("DRONE-D")
    assert f.idle()


def test_message_ids_number_across_flushes():
    f = fabric()
    f.submit("DANNY", "one")
    f.flush(1)
    f.submit("DANNY", "two")
    (second,) = f.flush(2)
    assert second.msg_id == "msg.2"
    assert second.num == 2


def test_submit_validation():
    f = fabric()
    with pytest.raises(TeamError, match="unknown sender"):
        f.submit("GHOST", "boo")
    with pytest.raises(TeamError, match="broadcast"):
        f.submit("DANNY", "hi", to="UGV-U")
    with pytest.raises(TeamError, match="address"):
        f.submit("UGV-U", "hi")
    with pytest.raises(TeamError, match="bad recipient"):
        f.submit("UGV-U", "hi", to="UGV-U")
    with pytest.raises(TeamError, match="bad recipient"):
        f.submit("UGV-U", "hi", to="NOBODY")
    with pytest.raises(TeamError, match="empty"):
        f.submit("DANNY", "   ")
    with pytest.raises(TeamError, match="latency"):
        TeamFabric(["A"], [], latency=0)
