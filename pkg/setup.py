from setuptools import setup, find_packages

requirements = ['numpy>=1.22', 'scipy>=1.8', 'torch>=1.13']
test_requirements = ['pytest>=7', 'hypothesis>=6', 'scikit-learn>=1.1']

setup(
    name='sosgate',
    version='0.1.0',
    packages=find_packages(exclude=['tests']),
    python_requires='>=3.9',
    install_requires=requirements,
    package_data={'sosgate': ['data/*.json']},
    include_package_data=True,
    tests_require=test_requirements + requirements,
    extras_require={'tests': test_requirements},
    entry_points={
        'console_scripts': [
            'sosgate = sosgate:main'
        ]
    },
)
