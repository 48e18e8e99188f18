#!/usr/bin/env python
"""
Package metadata for discrete-barycenter.
"""
import os
import re
import sys

from setuptools import setup

HERE = os.path.dirname(__file__)


def get_version(*file_paths):
    """
    Read ``__version__`` from the given module file.
    """
    filename = os.path.join(HERE, *file_paths)
    with open(filename, encoding='utf8') as handle:
        version_match = re.search(r"^__version__ = ['\"]([^'\"]*)['\"]", handle.read(), re.M)
    if version_match:
        return version_match.group(1)
    raise RuntimeError('Unable to find version string.')


REQUIREMENT_LINE = re.compile(r'([a-zA-Z0-9\-_.]+(?:\[[a-zA-Z0-9\-_.,\s]+\])?)([<>=!~][^#\s]+)?')


def is_requirement(line):
    """
    Whether ``line`` names a package rather than a comment, include, constraint or URL.
    """
    line = line.strip()
    return bool(line) and not line.startswith(('-r', '#', '-e', 'git+', '-c'))


def load_requirements(*requirements_paths):
    """
    Collect the requirements of the given ``.in`` files.

    Local constraint files pulled in with ``-c`` narrow the versions of
    packages that are already required; they never add packages.
    """
    requirements = {}
    constraint_files = set()

    def add(line, add_if_missing):
        match = REQUIREMENT_LINE.match(line.strip())
        if not match:
            return
        package, constraint = match.groups()
        existing = requirements.get(package)
        if existing and constraint and existing != constraint:
            raise ValueError(f'Conflicting constraints for {package}: "{existing}" and "{constraint}".')
        if add_if_missing or package in requirements:
            requirements[package] = constraint or existing

    for path in requirements_paths:
        with open(path, encoding='utf8') as reqs:
            for line in reqs:
                if is_requirement(line):
                    add(line, True)
                elif line.startswith('-c') and not line.startswith('-c http'):
                    name = line.split('#')[0].replace('-c', '').strip()
                    constraint_files.add(os.path.join(os.path.dirname(path), name))

    for constraint_file in constraint_files:
        with open(constraint_file, encoding='utf8') as reader:
            for line in reader:
                if is_requirement(line):
                    add(line, False)

    return [f'{package}{constraint or ""}' for package, constraint in sorted(requirements.items())]


VERSION = get_version('discrete_barycenter', '__init__.py')

if sys.argv[-1] == 'tag':
    print("Tagging the version on github:")
    os.system("git tag -a %s -m 'version %s'" % (VERSION, VERSION))
    os.system("git push --tags")
    sys.exit()

with open(os.path.join(HERE, 'README.rst'), encoding='utf8') as readme_file:
    README = readme_file.read()
with open(os.path.join(HERE, 'CHANGELOG.rst'), encoding='utf8') as changelog_file:
    CHANGELOG = changelog_file.read()

setup(
    name='discrete-barycenter',
    version=VERSION,
    description="""Exact discrete Wasserstein barycenters by column generation.""",
    long_description=README + '\n\n' + CHANGELOG,
    packages=[
        'discrete_barycenter',
    ],
    include_package_data=True,
    install_requires=load_requirements('requirements/base.in'),
    entry_points={
        'console_scripts': [
            'discrete-barycenter = discrete_barycenter.cli:main',
        ],
    },
    python_requires=">=3.9",
    license="AGPL 3.0",
    zip_safe=False,
    keywords='optimal transport, Wasserstein barycenter, linear programming, column generation',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: GNU Affero General Public License v3 or later (AGPLv3+)',
        'Natural Language :: English',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.12',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
)
