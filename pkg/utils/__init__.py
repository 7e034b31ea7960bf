from utils.helpers import PACKAGE_VERSION

__version__ = PACKAGE_VERSION
