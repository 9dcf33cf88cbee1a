/**
 * CLI entry: `serve --checkpoints DIR` speaks PRDN1 on stdin/stdout;
 * `train --data DIR --sigma S --out FILE` fits one checkpoint.
 */
import {parseArgs} from 'node:util';

import {serve} from './serve';
import {train, TRAIN_DEFAULTS} from './train';

function usage(): never {
  process.stderr.write(
    'usage: cli serve --checkpoints DIR\n' +
    '       cli train --data DIR --sigma S --out FILE [--depth N] [--channels N]\n' +
    '                 [--patch-size N] [--patches N] [--batch-size N] [--epochs N]\n' +
    '                 [--seed N]\n');
  process.exit(2);
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  if (command === 'serve') {
    const {values} = parseArgs({
      args: rest,
      options: {checkpoints: {type: 'string'}},
    });
    if (!values.checkpoints) usage();
    await serve(values.checkpoints);
    return 0;
  }
  if (command === 'train') {
    const {values} = parseArgs({
      args: rest,
      options: {
        data: {type: 'string'},
        sigma: {type: 'string'},
        out: {type: 'string'},
        depth: {type: 'string'},
        channels: {type: 'string'},
        'patch-size': {type: 'string'},
        patches: {type: 'string'},
        'batch-size': {type: 'string'},
        epochs: {type: 'string'},
        seed: {type: 'string'},
      },
    });
    if (!values.data || !values.sigma || !values.out) usage();
    const num = (v: string | undefined, dflt: number) =>
      v === undefined ? dflt : Number(v);
    await train({
      dataDir: values.data,
      sigma: Number(values.sigma),
      outFile: values.out,
      depth: num(values.depth, TRAIN_DEFAULTS.depth),
      channels: num(values.channels, TRAIN_DEFAULTS.channels),
      patchSize: num(values['patch-size'], TRAIN_DEFAULTS.patchSize),
      patches: num(values.patches, TRAIN_DEFAULTS.patches),
      batchSize: num(values['batch-size'], TRAIN_DEFAULTS.batchSize),
      epochs: num(values.epochs, TRAIN_DEFAULTS.epochs),
      valFraction: TRAIN_DEFAULTS.valFraction,
      plateauPatience: TRAIN_DEFAULTS.plateauPatience,
      seed: num(values.seed, TRAIN_DEFAULTS.seed),
    });
    return 0;
  }
  usage();
}

main().then(
  (code) => process.exit(code),
  (err) => {
    process.stderr.write(String(err && (err as Error).stack || err) + '\n');
    process.exit(1);
  },
);
