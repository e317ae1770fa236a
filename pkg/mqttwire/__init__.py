"""
A from-scratch MQTT 3.1.1 subset: codec, client session, broker and TCP server.
"""

from .broker import Broker, BrokerConnection, BrokerResult, Delivery
from .codec import (
    NEED_MORE_DATA,
    NeedMoreData,
    PacketTooLargeError,
    RemainingLengthError,
    StreamDecoder,
    decode,
    decode_remaining_length,
    encode,
    encode_remaining_length,
)
from .packets import (
    Connack,
    Connect,
    Disconnect,
    MalformedPacketError,
    MqttError,
    Packet,
    PacketType,
    Pingreq,
    Pingresp,
    ProtocolViolation,
    Puback,
    Publish,
    Suback,
    Subscribe,
)
from .server import MqttServer
from .session import (
    ClientSession,
    Connected,
    ConnectionRefused,
    Delivered,
    DeliveryFailed,
    InflightWindowFullError,
    MessageReceived,
    NotConnectedError,
    RetryPolicy,
    SessionState,
)
from .topics import is_valid_topic_filter, topic_matches

__all__ = [
    'Broker', 'BrokerConnection', 'BrokerResult', 'Delivery',
    'NEED_MORE_DATA', 'NeedMoreData', 'PacketTooLargeError', 'RemainingLengthError',
    'StreamDecoder', 'decode', 'decode_remaining_length', 'encode', 'encode_remaining_length',
    'Connack', 'Connect', 'Disconnect', 'MalformedPacketError', 'MqttError', 'Packet',
    'PacketType', 'Pingreq', 'Pingresp', 'ProtocolViolation', 'Puback', 'Publish',
    'Suback', 'Subscribe',
    'MqttServer',
    'ClientSession', 'Connected', 'ConnectionRefused', 'Delivered', 'DeliveryFailed',
    'InflightWindowFullError', 'MessageReceived', 'NotConnectedError', 'RetryPolicy',
    'SessionState',
    'is_valid_topic_filter', 'topic_matches',
]
