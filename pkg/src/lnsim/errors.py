"""Exception hierarchy shared by all lnsim modules."""


class LnSimError(Exception):
    """Base class for all simulator errors."""


# --- base chain ---

class DuplicateAsset(LnSimError):
    pass


class UnknownInput(LnSimError):
    pass


class DoubleSpend(LnSimError):
    pass


class BadWitness(LnSimError):
    pass


class ValueCreated(LnSimError):
    pass


class PrematureLocktime(LnSimError):
    pass


# --- channel ---

class InsufficientFunds(LnSimError):
    pass


class FundingUnconfirmed(LnSimError):
    pass


class InsufficientChannelBalance(LnSimError):
    pass


class ChannelNotOpen(LnSimError):
    pass


class ConcurrentUpdate(LnSimError):
    pass


class PartyOffline(LnSimError):
    pass


class NoSignedCommitment(LnSimError):
    pass


class NoRevocationSecret(LnSimError):
    pass


class DelayElapsed(LnSimError):
    pass


class BothOffline(LnSimError):
    pass


# --- htlc ---

class ExpiredBeforeAdd(LnSimError):
    pass


class WrongPreimage(LnSimError):
    pass


class UnknownHtlc(LnSimError):
    pass


class PastExpiry(LnSimError):
    pass


class NotYetExpired(LnSimError):
    pass


class BadTimeoutOrdering(LnSimError):
    pass


class ResponderDeclined(LnSimError):
    pass


# --- routing ---

class NoRoute(LnSimError):
    pass


class UnknownNode(LnSimError):
    pass


class EmptyRoute(LnSimError):
    pass


class NotAddressee(LnSimError):
    pass


class HtlcLockFailed(LnSimError):
    def __init__(self, hop_index, reason=""):
        super().__init__(f"HTLC lock failed at hop {hop_index}: {reason}")
        self.hop_index = hop_index


class PaymentTimeout(LnSimError):
    pass


# --- simnet / cli ---

class ConfigInvalid(LnSimError):
    def __init__(self, field, reason):
        super().__init__(f"invalid scenario config: {field}: {reason}")
        self.field = field
        self.reason = reason
